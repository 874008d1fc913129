"""Corpus BLEU, exact line search along the hypothesis envelope, and tuning."""
from __future__ import annotations

import math

import numpy as np
import pytest

from querysmt import FeatureWeights, corpus_bleu, mert_tune
from querysmt.mert import (
    BleuStats,
    PoolEntry,
    _upper_envelope,
    bleu_from_stats,
    line_search_envelope,
    sentence_stats,
    sweep_intervals,
)

import oracles
from helpers import make_toy_bundle


class TestBleu:
    def test_three_of_four_hand_case(self):
        # precisions all 1, orders above the candidate length skipped,
        # brevity penalty e^(1 - 4/3)
        got = corpus_bleu([("a", "b", "c")], [("a", "b", "c", "d")])
        assert got == pytest.approx(math.exp(1 - 4 / 3), abs=1e-6)

    def test_perfect_match_is_one(self):
        assert corpus_bleu([("a", "b", "c", "d")], [("a", "b", "c", "d")]) == 1.0

    def test_empty_candidate_scores_zero(self):
        assert corpus_bleu([()], [("a", "b")]) == 0.0

    def test_short_candidate_brevity_penalty(self):
        got = corpus_bleu([("a", "b")], [("a", "b", "c")])
        assert got == pytest.approx(math.exp(1 - 3 / 2), rel=1e-12)

    def test_zero_match_orders_floored(self):
        got = corpus_bleu([("x", "y", "z", "w", "q")], [("a", "b", "c", "d", "e")])
        want = (1 / 10 * 1 / 8 * 1 / 6 * 1 / 4) ** 0.25
        assert got == pytest.approx(want, rel=1e-9)

    def test_clipping_caps_repeated_ngrams(self):
        stats = sentence_stats(("a", "a", "a"), ("a",))
        assert stats.matches[0] == 1 and stats.totals[0] == 3

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_reference_implementation(self, seed):
        rng = np.random.default_rng(seed)
        vocab = ["a", "b", "c", "d", "e"]
        cands, refs = [], []
        for _ in range(8):
            nc = int(rng.integers(0, 8))
            nr = int(rng.integers(1, 8))
            cands.append(tuple(vocab[i] for i in rng.integers(0, 5, size=nc)))
            refs.append(tuple(vocab[i] for i in rng.integers(0, 5, size=nr)))
        if all(len(c) == 0 for c in cands):
            cands[0] = ("a",)
        assert corpus_bleu(cands, refs) == pytest.approx(
            oracles.corpus_bleu(cands, refs), abs=1e-12
        )

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError, match="candidates vs"):
            corpus_bleu([("a",)], [])

    def test_empty_corpus_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            corpus_bleu([], [])


class TestBleuStats:
    def test_add_subtract_round_trip(self):
        a = sentence_stats(("a", "b", "c"), ("a", "b"))
        b = sentence_stats(("x", "y"), ("x", "z"))
        agg = a.copy()
        agg += b
        agg -= b
        assert np.array_equal(agg.matches, a.matches)
        assert np.array_equal(agg.totals, a.totals)
        assert agg.cand_len == a.cand_len and agg.ref_len == a.ref_len

    def test_copy_is_independent(self):
        a = sentence_stats(("a",), ("a",))
        c = a.copy()
        c.matches[0] += 5
        assert a.matches[0] == 1


class TestUpperEnvelope:
    def test_three_line_hand_case(self):
        # y = -x, y = 2, y = x: V shape with a flat top segment
        a = np.array([0.0, 2.0, 0.0])
        b = np.array([-1.0, 0.0, 1.0])
        env = _upper_envelope(a, b)
        assert env == [(-math.inf, 0), (-2.0, 1), (2.0, 2)]

    def test_duplicate_lines_keep_smallest_index(self):
        env = _upper_envelope(np.array([1.0, 1.0]), np.array([0.5, 0.5]))
        assert env == [(-math.inf, 0)]

    def test_equal_slope_keeps_max_intercept(self):
        env = _upper_envelope(np.array([1.0, 3.0]), np.array([0.0, 0.0]))
        assert env == [(-math.inf, 1)]

    def test_dominated_line_dropped(self):
        # middle line never reaches the envelope
        a = np.array([0.0, -5.0, 0.0])
        b = np.array([-1.0, 0.0, 1.0])
        env = _upper_envelope(a, b)
        assert [idx for _, idx in env] == [0, 2]


def feat(*values):
    out = np.zeros(8)
    out[: len(values)] = values
    return out


def entry(tokens, reference, features):
    return PoolEntry(
        tokens=tuple(tokens),
        features=np.asarray(features, dtype=float),
        stats=sentence_stats(tuple(tokens), tuple(reference)),
    )


def random_pools(rng, n_sentences=6, max_pool=8):
    vocab = ["a", "b", "c", "d", "e"]
    pools = []
    refs = []
    for _ in range(n_sentences):
        ref = tuple(vocab[i] for i in rng.integers(0, 5, size=int(rng.integers(3, 7))))
        refs.append(ref)
        pool = []
        for _ in range(int(rng.integers(1, max_pool + 1))):
            cand = tuple(vocab[i] for i in rng.integers(0, 5, size=int(rng.integers(1, 7))))
            pool.append(entry(cand, ref, rng.standard_normal(8)))
        pools.append(pool)
    return pools, refs


class TestSweepIntervals:
    def test_interval_structure(self):
        rng = np.random.default_rng(0)
        pools, _ = random_pools(rng)
        intervals = sweep_intervals(pools, FeatureWeights(), rng.standard_normal(8))
        assert intervals[0][0] == -math.inf
        assert intervals[-1][1] == math.inf
        for (lo, hi, _), (lo2, _, _) in zip(intervals, intervals[1:]):
            assert lo < hi
            assert hi == lo2

    @pytest.mark.parametrize("seed", range(12))
    def test_matches_dense_grid_search(self, seed):
        """Every interior grid point must land in an interval whose BLEU equals
        the argmax-then-score value computed from scratch at that point."""
        rng = np.random.default_rng(seed)
        pools, refs = random_pools(rng)
        w = rng.standard_normal(8)
        d = rng.standard_normal(8)
        intervals = sweep_intervals(pools, w, d)
        bounds = [lo for lo, _, _ in intervals[1:]]

        grid = np.linspace(-5.0, 5.0, 2001)
        for gamma in grid:
            if bounds and min(abs(gamma - b) for b in bounds) < 1e-9:
                continue  # winner is ambiguous exactly on a boundary
            counts = []
            for pool, ref in zip(pools, refs):
                scores = [e.features @ (w + gamma * d) for e in pool]
                winner = pool[int(np.argmax(scores))]
                counts.append(oracles.ngram_counts(winner.tokens, ref))
            want = oracles.bleu_from_counts(counts)
            got = next(b for lo, hi, b in intervals if lo <= gamma < hi)
            assert got == pytest.approx(want, abs=1e-12), gamma

    def test_empty_pool_rejected(self):
        with pytest.raises(ValueError, match="empty hypothesis pool"):
            sweep_intervals([[]], FeatureWeights(), np.ones(8))


class TestLineSearch:
    def test_single_interval_stays_put(self):
        pools = [[entry(("a",), ("a",), feat(1.0))]]
        gamma, bleu = line_search_envelope(pools, np.array([1.0] + [0.0] * 7), np.eye(8)[1])
        assert gamma == 0.0
        assert bleu == 1.0

    def test_interior_interval_takes_midpoint(self):
        # three hypotheses trade off along gamma; the perfect-BLEU one owns
        # the middle interval (0.25, 0.75), so the step is its midpoint
        ref = ("a", "b")
        pools = [
            [
                entry(("x",), ref, feat(1.0, -1.0)),
                entry(("a", "b"), ref, feat(0.75, 0.0)),
                entry(("y",), ref, feat(0.0, 1.0)),
            ]
        ]
        w = np.array([1.0] + [0.0] * 7)
        d = np.array([0.0, 1.0] + [0.0] * 6)
        gamma, bleu = line_search_envelope(pools, w, d)
        assert gamma == pytest.approx(0.5, abs=1e-12)
        assert bleu == 1.0

    def test_tie_prefers_lower_interval(self):
        # both hypotheses have identical BLEU, so the unbounded-left interval
        # wins and the step lands one unit inside it
        ref = ("a",)
        pools = [
            [
                entry(("a",), ref, feat(1.0, 0.0)),
                entry(("a",), ref, feat(0.0, 1.0)),
            ]
        ]
        w = np.array([1.0] + [0.0] * 7)
        d = np.array([0.0, 1.0] + [0.0] * 6)
        gamma, bleu = line_search_envelope(pools, w, d)
        assert gamma == 0.0  # boundary at 1.0, one unit inside the left interval
        assert bleu == 1.0


DEV_SET = [
    (("the", "cat", "sat", "down"), ("the", "feline", "sat", "down")),
    (("the", "dog", "ran", "away"), ("the", "hound", "ran", "away")),
    (("a", "cat", "sat", "here"), ("a", "feline", "sat", "here")),
    (("the", "cat", "ran", "away"), ("the", "feline", "ran", "away")),
]

# References that keep the source words: the default weights favor the
# high-phi synonym mappings, so tuning starts below BLEU 1 and must move.
DEV_IDENTITY = [(q, q) for q, _ in DEV_SET]


class TestMertTune:
    def test_result_shape(self, toy_bundle):
        result = mert_tune(toy_bundle, DEV_SET, max_iters=3, nbest=20, seed=7)
        assert 1 <= result.iterations <= 3
        assert result.bleu is not None and 0.0 <= result.bleu <= 1.0
        # a final pass that only finds no new hypotheses adds no inner list
        assert result.iterations - 1 <= len(result.accepted_bleus) <= result.iterations
        for inner in result.accepted_bleus:
            for prev, cur in zip(inner, inner[1:]):
                assert cur > prev

    def test_accepted_moves_raise_pool_bleu(self, toy_bundle):
        result = mert_tune(toy_bundle, DEV_IDENTITY, max_iters=3, nbest=20, seed=7)
        flat = [b for inner in result.accepted_bleus for b in inner]
        assert flat, "expected at least one accepted line-search move"
        assert flat == sorted(flat)
        assert result.bleu >= max(flat) - 1e-12
        # the tuned weights actually pick identity rewrites from the pool
        assert result.bleu > 0.5

    def test_log_lines_parse(self, toy_bundle, tmp_path):
        log = tmp_path / "mert.log"
        result = mert_tune(toy_bundle, DEV_SET, max_iters=2, nbest=10, seed=3, log_path=log)
        assert log.read_text(encoding="utf-8").splitlines() == result.log_lines
        for line in result.log_lines:
            it, d_id, gamma, bleu = line.split("\t")
            assert 0 <= int(it) < 2
            assert 0 <= int(d_id) < 16  # eight axes plus eight random directions
            float(gamma)
            assert 0.0 <= float(bleu) <= 1.0

    def test_same_seed_reproduces(self, toy_bundle):
        a = mert_tune(toy_bundle, DEV_SET, max_iters=2, nbest=10, seed=11)
        b = mert_tune(toy_bundle, DEV_SET, max_iters=2, nbest=10, seed=11)
        assert a.log_lines == b.log_lines
        assert a.weights == b.weights
        assert a.bleu == b.bleu

    def test_zero_iterations_is_noop(self, toy_bundle):
        result = mert_tune(toy_bundle, DEV_SET, max_iters=0)
        assert result.weights == toy_bundle.weights
        assert result.bleu is None
        assert result.iterations == 0
        assert result.log_lines == [] and result.accepted_bleus == []

    def test_empty_dev_rejected(self, toy_bundle):
        with pytest.raises(ValueError, match="empty dev"):
            mert_tune(toy_bundle, [])

    def test_negative_iters_rejected(self, toy_bundle):
        with pytest.raises(ValueError, match="max_iters"):
            mert_tune(toy_bundle, DEV_SET, max_iters=-1)
