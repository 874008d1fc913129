"""Minimum error rate training: corpus BLEU and exact line search.

The line search is exact along a direction d: each hypothesis's score is a
line gamma -> (F . w) + gamma (F . d), so per sentence the best hypothesis
as a function of gamma is the upper envelope of those lines. Merging the
envelope vertices across sentences splits gamma into intervals with constant
winners; sweeping the intervals left to right while updating aggregate BLEU
sufficient statistics yields corpus BLEU per interval in one pass.

Corpus BLEU is the standard 4-gram variant with brevity penalty
min(1, e^(1 - r/c)). Orders with zero matches but nonzero totals are floored
at 1/(2 * total); orders with zero totals (candidates shorter than n) are
skipped, i.e. treated as precision one.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus_io import TokenSeq
from .decoder import FeatureWeights, ModelBundle, N_FEATURES, decode

BLEU_MAX_ORDER = 4


@dataclass
class BleuStats:
    """Additive sufficient statistics for corpus BLEU."""

    matches: np.ndarray = field(default_factory=lambda: np.zeros(BLEU_MAX_ORDER, dtype=np.int64))
    totals: np.ndarray = field(default_factory=lambda: np.zeros(BLEU_MAX_ORDER, dtype=np.int64))
    cand_len: int = 0
    ref_len: int = 0

    def __iadd__(self, other: "BleuStats") -> "BleuStats":
        self.matches += other.matches
        self.totals += other.totals
        self.cand_len += other.cand_len
        self.ref_len += other.ref_len
        return self

    def __isub__(self, other: "BleuStats") -> "BleuStats":
        self.matches -= other.matches
        self.totals -= other.totals
        self.cand_len -= other.cand_len
        self.ref_len -= other.ref_len
        return self

    def copy(self) -> "BleuStats":
        return BleuStats(self.matches.copy(), self.totals.copy(), self.cand_len, self.ref_len)


def sentence_stats(candidate: TokenSeq, reference: TokenSeq) -> BleuStats:
    """Clipped n-gram matches and totals for one candidate against one reference."""
    stats = BleuStats()
    stats.cand_len = len(candidate)
    stats.ref_len = len(reference)
    for n in range(1, BLEU_MAX_ORDER + 1):
        cand_ngrams = Counter(tuple(candidate[i : i + n]) for i in range(len(candidate) - n + 1))
        ref_ngrams = Counter(tuple(reference[i : i + n]) for i in range(len(reference) - n + 1))
        stats.totals[n - 1] = max(len(candidate) - n + 1, 0)
        stats.matches[n - 1] = sum(min(c, ref_ngrams[g]) for g, c in cand_ngrams.items())
    return stats


def bleu_from_stats(stats: BleuStats) -> float:
    if stats.cand_len == 0:
        return 0.0
    log_p = 0.0
    for n in range(BLEU_MAX_ORDER):
        total = int(stats.totals[n])
        if total == 0:
            continue
        matches = int(stats.matches[n])
        p = matches / total if matches > 0 else 1.0 / (2.0 * total)
        log_p += math.log(p) / BLEU_MAX_ORDER
    bp = min(1.0, math.exp(1.0 - stats.ref_len / stats.cand_len))
    return bp * math.exp(log_p)


def corpus_bleu(candidates: Sequence[TokenSeq], references: Sequence[TokenSeq]) -> float:
    """Pooled corpus BLEU-4 over parallel candidate/reference lists."""
    if len(candidates) != len(references):
        raise ValueError(f"{len(candidates)} candidates vs {len(references)} references")
    if not candidates:
        raise ValueError("cannot score an empty corpus")
    agg = BleuStats()
    for cand, ref in zip(candidates, references):
        agg += sentence_stats(cand, ref)
    return bleu_from_stats(agg)


@dataclass
class PoolEntry:
    """One n-best hypothesis kept for tuning: surface tokens, feature vector,
    precomputed BLEU stats against its sentence's reference."""

    tokens: tuple[str, ...]
    features: np.ndarray
    stats: BleuStats


def _upper_envelope(a: np.ndarray, b: np.ndarray) -> list[tuple[float, int]]:
    """Upper envelope of lines y = a_i + b_i * x.

    Returns [(x_start, index)] with x_start ascending; the first entry starts
    at -inf. Among lines with equal slope only the max intercept survives
    (smallest index on exact duplicates).
    """
    n = len(a)
    order = sorted(range(n), key=lambda i: (b[i], a[i], -i))
    lines: list[tuple[float, float, int]] = []
    for i in order:
        if lines and lines[-1][0] == b[i]:
            lines[-1] = (float(b[i]), float(a[i]), i)
        else:
            lines.append((float(b[i]), float(a[i]), i))

    hull: list[list] = []  # [slope, intercept, index, x_start]
    for slope, intercept, idx in lines:
        x = -math.inf
        while hull:
            top_slope, top_intercept, _, top_x = hull[-1]
            x = (top_intercept - intercept) / (slope - top_slope)
            if x <= top_x:
                hull.pop()
                continue
            break
        if not hull:
            x = -math.inf
        hull.append([slope, intercept, idx, x])
    return [(entry[3], entry[2]) for entry in hull]


def sweep_intervals(
    pools: Sequence[Sequence[PoolEntry]],
    weights: FeatureWeights | np.ndarray,
    direction: np.ndarray,
) -> list[tuple[float, float, float]]:
    """Corpus BLEU as a step function of gamma along the direction.

    Returns [(lo, hi, bleu)] with lo/hi interval bounds (inf at the edges),
    covering the whole line in ascending order.
    """
    w = weights.to_vector() if isinstance(weights, FeatureWeights) else np.asarray(weights, dtype=float)
    d = np.asarray(direction, dtype=float)

    events: list[tuple[float, int, int, int, int]] = []
    agg = BleuStats()
    for s, pool in enumerate(pools):
        if not pool:
            raise ValueError(f"empty hypothesis pool for sentence {s}")
        F = np.stack([e.features for e in pool])
        env = _upper_envelope(F @ w, F @ d)
        agg += pool[env[0][1]].stats
        for k in range(1, len(env)):
            events.append((env[k][0], s, k, env[k - 1][1], env[k][1]))
    events.sort(key=lambda e: (e[0], e[1], e[2]))

    intervals: list[tuple[float, float, float]] = []
    first_hi = events[0][0] if events else math.inf
    intervals.append((-math.inf, first_hi, bleu_from_stats(agg)))
    i = 0
    while i < len(events):
        x = events[i][0]
        while i < len(events) and events[i][0] == x:
            _, s, _, old, new = events[i]
            agg -= pools[s][old].stats
            agg += pools[s][new].stats
            i += 1
        hi = events[i][0] if i < len(events) else math.inf
        intervals.append((x, hi, bleu_from_stats(agg)))
    return intervals


def line_search_envelope(
    pools: Sequence[Sequence[PoolEntry]],
    weights: FeatureWeights | np.ndarray,
    direction: np.ndarray,
) -> tuple[float, float]:
    """Best step size along the direction and the corpus BLEU it reaches.

    Ties prefer the lower interval. The step is the midpoint of the winning
    interval (one unit inside it when an edge is infinite; zero when the
    envelope has a single interval).
    """
    intervals = sweep_intervals(pools, weights, direction)
    best_lo, best_hi, best_bleu = intervals[0]
    for lo, hi, bleu in intervals[1:]:
        if bleu > best_bleu:
            best_lo, best_hi, best_bleu = lo, hi, bleu
    if math.isinf(best_lo) and math.isinf(best_hi):
        gamma = 0.0
    elif math.isinf(best_lo):
        gamma = best_hi - 1.0
    elif math.isinf(best_hi):
        gamma = best_lo + 1.0
    else:
        gamma = (best_lo + best_hi) / 2.0
    return gamma, best_bleu


def _pool_bleu(pools: Sequence[Sequence[PoolEntry]], weights_vec: np.ndarray) -> float:
    """Corpus BLEU of the per-sentence argmax under the given weights."""
    agg = BleuStats()
    for pool in pools:
        F = np.stack([e.features for e in pool])
        agg += pool[int(np.argmax(F @ weights_vec))].stats
    return bleu_from_stats(agg)


@dataclass
class MertResult:
    weights: FeatureWeights
    bleu: float | None
    log_lines: list[str]
    iterations: int
    # Accepted line-search BLEUs, one inner list per outer iteration that ran
    # a tuning round (a final pass that only discovers no new hypotheses adds
    # none). Within a round each accepted move improves pooled BLEU by at
    # least min_gain, so every inner list is strictly increasing.
    accepted_bleus: list[list[float]] = field(default_factory=list)


def mert_tune(
    bundle: ModelBundle,
    dev: Sequence[tuple[TokenSeq, TokenSeq]],
    max_iters: int = 10,
    nbest: int = 100,
    seed: int = 42,
    min_gain: float = 1e-4,
    log_path: str | Path | None = None,
) -> MertResult:
    """Tune feature weights to maximize corpus BLEU on the dev set.

    Each outer iteration decodes the dev set with the current weights and
    merges the n-best lists into growing per-sentence pools (deduplicated by
    surface, first derivation kept). The inner loop line-searches the eight
    coordinate axes plus eight seeded random directions, taking the best move
    until the gain drops below min_gain. Outer iterations stop when decoding
    adds no new hypothesis or max_iters is reached. Returns the weights with
    the best pooled corpus BLEU seen.

    The log records one line per line search: iteration, direction id, step,
    BLEU, tab-separated.
    """
    if max_iters < 0:
        raise ValueError("max_iters must be >= 0")
    if not dev:
        raise ValueError("cannot tune on an empty dev set")
    if max_iters == 0:
        return MertResult(bundle.weights, None, [], 0, [])

    rng = np.random.default_rng(seed)
    weights_vec = bundle.weights.to_vector()
    pools: list[dict[str, PoolEntry]] = [{} for _ in dev]
    log_lines: list[str] = []
    best_bleu = -1.0
    best_vec = weights_vec.copy()
    iterations = 0
    accepted_bleus: list[list[float]] = []

    for it in range(max_iters):
        iterations = it + 1
        current = FeatureWeights.from_vector(weights_vec)
        new_hyps = 0
        for s, (query, reference) in enumerate(dev):
            for entry in decode(bundle, query, n=nbest, weights=current):
                if entry.surface not in pools[s]:
                    pools[s][entry.surface] = PoolEntry(
                        tokens=entry.tokens,
                        features=np.asarray(entry.features, dtype=float),
                        stats=sentence_stats(entry.tokens, reference),
                    )
                    new_hyps += 1
        if it > 0 and new_hyps == 0:
            break

        pool_lists = [list(pool.values()) for pool in pools]
        current_bleu = _pool_bleu(pool_lists, weights_vec)
        accepted: list[float] = []
        while True:
            directions = [np.eye(N_FEATURES)[k] for k in range(N_FEATURES)]
            for _ in range(N_FEATURES):
                vec = rng.standard_normal(N_FEATURES)
                directions.append(vec / np.linalg.norm(vec))
            round_best: tuple[float, float, np.ndarray] | None = None
            for d_id, direction in enumerate(directions):
                gamma, bleu = line_search_envelope(pool_lists, weights_vec, direction)
                log_lines.append(f"{it}\t{d_id}\t{gamma:.6g}\t{bleu:.6g}")
                if round_best is None or bleu > round_best[0]:
                    round_best = (bleu, gamma, direction)
            assert round_best is not None
            if round_best[0] >= current_bleu + min_gain and round_best[1] != 0.0:
                current_bleu = round_best[0]
                weights_vec = weights_vec + round_best[1] * round_best[2]
                accepted.append(current_bleu)
            else:
                break
        accepted_bleus.append(accepted)
        if current_bleu > best_bleu:
            best_bleu = current_bleu
            best_vec = weights_vec.copy()

    if log_path is not None:
        Path(log_path).write_text("\n".join(log_lines) + "\n", encoding="utf-8")
    return MertResult(
        weights=FeatureWeights.from_vector(best_vec),
        bleu=best_bleu,
        log_lines=log_lines,
        iterations=iterations,
        accepted_bleus=accepted_bleus,
    )
