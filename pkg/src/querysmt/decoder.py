"""Log-linear beam-search decoder over a phrase table and trigram LM.

Eight features per hypothesis, in fixed order:

    0  sum of log phi(target | source) over applied phrases
    1  sum of log phi(source | target)
    2  sum of log lex(target | source)
    3  sum of log lex(source | target)
    4  LM log probability of the output, including the end-of-sentence step
    5  negative output length in tokens (word penalty)
    6  negative number of applied phrases, pass-through included
    7  negative total distortion: sum of |start_k - prev_end_k - 1|

Hypotheses are expanded stack by stack on the number of covered source
words, recombined on (coverage, last covered position, LM state), and pruned
per stack to ``beam_size`` survivors (histogram pruning; no future-cost
estimate). Source positions no table entry covers get a pass-through option
that copies the token through with zero translation scores.

Search keeps up to the requested n-best size per recombination state so that
lower-scoring derivations can surface in the final list. Completed
hypotheses are deduplicated by output surface and rescored as an exact dot
product of the reconstructed feature vector with the weights.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .corpus_io import NormConfig, TokenSeq
from .lm import TrigramModel
from .phrasetable import PhraseTable

FEATURE_NAMES = (
    "phi_fwd",
    "phi_rev",
    "lex_fwd",
    "lex_rev",
    "lm",
    "word_penalty",
    "phrase_penalty",
    "distortion",
)

N_FEATURES = len(FEATURE_NAMES)


@dataclass(frozen=True)
class FeatureWeights:
    """Log-linear weights, one per decoder feature."""

    phi_fwd: float = 0.2
    phi_rev: float = 0.2
    lex_fwd: float = 0.2
    lex_rev: float = 0.2
    lm: float = 0.5
    word_penalty: float = 0.0
    phrase_penalty: float = 0.0
    distortion: float = 0.3

    def __post_init__(self) -> None:
        vec = self.to_vector()
        if not np.all(np.isfinite(vec)):
            raise ValueError("feature weights must be finite")
        if not np.any(vec != 0.0):
            raise ValueError("at least one feature weight must be non-zero")

    def to_vector(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in FEATURE_NAMES], dtype=float)

    @classmethod
    def from_vector(cls, vec: Sequence[float]) -> "FeatureWeights":
        if len(vec) != N_FEATURES:
            raise ValueError(f"expected {N_FEATURES} weights, got {len(vec)}")
        return cls(**{name: float(v) for name, v in zip(FEATURE_NAMES, vec)})


@dataclass(frozen=True)
class DecodeParams:
    beam_size: int = 100
    distortion_limit: int = 3
    nbest_size: int = 5

    def __post_init__(self) -> None:
        if self.beam_size < 1:
            raise ValueError("beam_size must be >= 1")
        if self.distortion_limit < 0:
            raise ValueError("distortion_limit must be >= 0")
        if self.nbest_size < 1:
            raise ValueError("nbest_size must be >= 1")


@dataclass(frozen=True)
class ModelBundle:
    """Everything rewrite-time decoding needs."""

    phrase_table: PhraseTable
    lm: TrigramModel
    weights: FeatureWeights = field(default_factory=FeatureWeights)
    params: DecodeParams = field(default_factory=DecodeParams)
    norm: NormConfig = field(default_factory=NormConfig)


@dataclass(frozen=True)
class NBestEntry:
    tokens: tuple[str, ...]
    features: tuple[float, ...]
    score: float

    @property
    def surface(self) -> str:
        return " ".join(self.tokens)


NBestList = list[NBestEntry]


def score_hypothesis(features: Sequence[float], weights: FeatureWeights) -> float:
    """Exact dot product of a feature vector with the weights."""
    if len(features) != N_FEATURES:
        raise ValueError(f"expected {N_FEATURES} features, got {len(features)}")
    return float(np.dot(np.asarray(features, dtype=float), weights.to_vector()))


class _Option:
    """One way to cover a source span: target tokens plus static scores."""

    __slots__ = ("start", "end", "span_mask", "target", "logs", "static_weighted")

    def __init__(self, start: int, end: int, target: tuple[str, ...], logs: tuple[float, float, float, float], weights_vec: np.ndarray):
        self.start = start
        self.end = end
        self.span_mask = ((1 << (end - start + 1)) - 1) << start
        self.target = target
        self.logs = logs
        # Weighted sum of everything that does not depend on decoder state:
        # the four translation scores, the word penalty, the phrase penalty.
        self.static_weighted = (
            weights_vec[0] * logs[0]
            + weights_vec[1] * logs[1]
            + weights_vec[2] * logs[2]
            + weights_vec[3] * logs[3]
            + weights_vec[5] * -len(target)
            + weights_vec[6] * -1.0
        )


class _Hyp:
    __slots__ = ("score", "mask", "last_end", "lm_state", "parent", "option", "lm_delta", "jump", "seq")

    def __init__(self, score, mask, last_end, lm_state, parent, option, lm_delta, jump, seq):
        self.score = score
        self.mask = mask
        self.last_end = last_end
        self.lm_state = lm_state
        self.parent = parent
        self.option = option
        self.lm_delta = lm_delta
        self.jump = jump
        self.seq = seq


def _collect_options(
    table: PhraseTable, query: Sequence[str], weights_vec: np.ndarray
) -> list[_Option]:
    options: list[_Option] = []
    covered: set[int] = set()
    max_len = min(table.max_source_len, len(query))
    for i1 in range(len(query)):
        for i2 in range(i1, min(i1 + max_len, len(query))):
            matches = table.lookup(tuple(query[i1 : i2 + 1]))
            if not matches:
                continue
            covered.update(range(i1, i2 + 1))
            for target, e in matches:
                logs = (
                    math.log(e.phi_fwd),
                    math.log(e.phi_rev),
                    math.log(e.lex_fwd),
                    math.log(e.lex_rev),
                )
                options.append(_Option(i1, i2, target, logs, weights_vec))
    for i, tok in enumerate(query):
        if i not in covered:
            options.append(_Option(i, i, (tok,), (0.0, 0.0, 0.0, 0.0), weights_vec))
    return options


def _reconstruct(hyp: _Hyp, eos_lp: float) -> tuple[tuple[str, ...], tuple[float, ...]]:
    """Walk the back-pointer chain and rebuild output tokens and features."""
    feats = [0.0] * N_FEATURES
    chain = []
    node = hyp
    while node.option is not None:
        chain.append(node)
        node = node.parent
    chain.reverse()
    tokens: list[str] = []
    for node in chain:
        opt = node.option
        feats[0] += opt.logs[0]
        feats[1] += opt.logs[1]
        feats[2] += opt.logs[2]
        feats[3] += opt.logs[3]
        feats[4] += node.lm_delta
        feats[5] -= len(opt.target)
        feats[6] -= 1.0
        feats[7] -= node.jump
        tokens.extend(opt.target)
    feats[4] += eos_lp
    return tuple(tokens), tuple(feats)


def _search(
    options: list[_Option],
    n_src: int,
    lm: TrigramModel,
    weights_vec: np.ndarray,
    beam_size: int,
    distortion_limit: int,
    k_per_state: int,
) -> list[tuple[float, int, tuple[tuple[str, ...], tuple[float, ...]]]]:
    """Run beam search; return completed (score, seq, (tokens, features))."""
    w_lm = weights_vec[4]
    w_dist = weights_vec[7]
    full_mask = (1 << n_src) - 1

    seq = 0
    root = _Hyp(0.0, 0, -1, lm.start_state(), None, None, 0.0, 0, seq)
    stacks: list[dict[tuple, list[_Hyp]]] = [dict() for _ in range(n_src + 1)]
    stacks[0][(0, -1, root.lm_state)] = [root]
    completed: list[tuple[float, int, tuple[tuple[str, ...], tuple[float, ...]]]] = []

    for covered in range(n_src):
        stack = stacks[covered]
        if not stack:
            continue
        pool: list[_Hyp] = []
        for hyps in stack.values():
            if len(hyps) > k_per_state:
                hyps.sort(key=lambda h: (-h.score, h.seq))
                del hyps[k_per_state:]
            pool.extend(hyps)
        pool.sort(key=lambda h: (-h.score, h.seq))
        del pool[beam_size:]

        for hyp in pool:
            mask = hyp.mask
            anchor = hyp.last_end + 1
            for opt in options:
                if opt.span_mask & mask:
                    continue
                jump = abs(opt.start - anchor)
                if jump > distortion_limit:
                    continue
                lm_delta = 0.0
                state = hyp.lm_state
                for tok in opt.target:
                    lp, state = lm.score_step(state, tok)
                    lm_delta += lp
                score = hyp.score + opt.static_weighted + w_lm * lm_delta + w_dist * -jump
                new_mask = mask | opt.span_mask
                seq += 1
                child = _Hyp(score, new_mask, opt.end, state, hyp, opt, lm_delta, jump, seq)
                if new_mask == full_mask:
                    eos_lp = lm.score_end(state)
                    tokens, feats = _reconstruct(child, eos_lp)
                    final = float(np.dot(np.asarray(feats), weights_vec))
                    completed.append((final, child.seq, (tokens, feats)))
                else:
                    key = (new_mask, opt.end, state)
                    bucket = stacks[new_mask.bit_count()].setdefault(key, [])
                    bucket.append(child)
    return completed


def decode(
    bundle: ModelBundle,
    query_tokens: TokenSeq,
    n: int | None = None,
    weights: FeatureWeights | None = None,
) -> NBestList:
    """Beam-decode a tokenized query into up to n distinct rewrites.

    Returns at least one hypothesis: pass-through options make every input
    coverable, and if the distortion limit strands every beam entry the
    search reruns monotone, which always completes.
    """
    if not query_tokens:
        raise ValueError("cannot decode an empty token sequence")
    w = weights if weights is not None else bundle.weights
    size = n if n is not None else bundle.params.nbest_size
    if size < 1:
        raise ValueError("n must be >= 1")
    weights_vec = w.to_vector()
    options = _collect_options(bundle.phrase_table, query_tokens, weights_vec)

    completed = _search(
        options,
        len(query_tokens),
        bundle.lm,
        weights_vec,
        bundle.params.beam_size,
        bundle.params.distortion_limit,
        k_per_state=size,
    )
    if not completed and bundle.params.distortion_limit > 0:
        completed = _search(
            options, len(query_tokens), bundle.lm, weights_vec,
            bundle.params.beam_size, 0, k_per_state=size,
        )
    if not completed:
        raise RuntimeError("decoder produced no complete hypothesis")

    best_by_surface: dict[tuple[str, ...], tuple[float, int, tuple]] = {}
    for score, hseq, payload in completed:
        tokens = payload[0]
        prev = best_by_surface.get(tokens)
        if prev is None or (score, -hseq) > (prev[0], -prev[1]):
            best_by_surface[tokens] = (score, hseq, payload)
    ranked = sorted(best_by_surface.values(), key=lambda item: (-item[0], item[1]))
    return [
        NBestEntry(tokens=payload[0], features=payload[1], score=score)
        for score, _, payload in ranked[:size]
    ]
