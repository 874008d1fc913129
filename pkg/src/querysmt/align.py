"""Word alignment: IBM Model 1 EM training and alignment symmetrization.

Training learns t(target | source) tables by expectation maximization over the
parallel corpus, with a null source token absorbing target words that align to
nothing. Alignments for phrase extraction come from the argmax link per target
position, run in both directions and combined with the grow-diag-final-and
heuristic.

All accumulation happens in corpus order or sorted-key order, so training is
bit-reproducible for a fixed corpus regardless of hash seeds.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .corpus_io import TokenSeq
from .errors import FormatError

NULL_TOKEN = "<null>"

_PROB_FLOOR = 1e-12

# 8-neighborhood used by the grow step, in the conventional scan order.
_NEIGHBORS = ((-1, 0), (0, -1), (1, 0), (0, 1), (-1, -1), (-1, 1), (1, -1), (1, 1))


@dataclass(frozen=True)
class AlignmentMatrix:
    """Link set between a source side of length I and target side of length J."""

    source_len: int
    target_len: int
    links: frozenset[tuple[int, int]]

    def __post_init__(self) -> None:
        for (i, j) in self.links:
            if not (0 <= i < self.source_len and 0 <= j < self.target_len):
                raise ValueError(f"link ({i},{j}) out of bounds {self.source_len}x{self.target_len}")

    def transpose(self) -> "AlignmentMatrix":
        return AlignmentMatrix(
            source_len=self.target_len,
            target_len=self.source_len,
            links=frozenset((j, i) for (i, j) in self.links),
        )


class TranslationTable:
    """t(target | source) probabilities, including the null source token.

    Rows (fixed source) sum to one after every M-step. ``log_likelihoods``
    records the corpus log-likelihood under the parameters entering each EM
    iteration, which EM guarantees to be non-decreasing.
    """

    def __init__(self, probs: dict[tuple[str, str], float], log_likelihoods: list[float] | None = None):
        self.probs = probs
        self.log_likelihoods = log_likelihoods or []

    def prob(self, source: str, target: str) -> float:
        return self.probs.get((source, target), 0.0)

    def row(self, source: str) -> dict[str, float]:
        return {t: p for (s, t), p in self.probs.items() if s == source}

    def dump_lines(self) -> list[str]:
        return [f"{s}\t{t}\t{p:.17g}" for (s, t), p in sorted(self.probs.items())]

    def save(self, path: str | Path) -> None:
        Path(path).write_text("\n".join(self.dump_lines()) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "TranslationTable":
        probs: dict[tuple[str, str], float] = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line:
                    continue
                cols = line.split("\t")
                if len(cols) != 3:
                    raise FormatError(f"{path}:{lineno}: expected 3 tab-separated fields")
                try:
                    probs[(cols[0], cols[1])] = float(cols[2])
                except ValueError as exc:
                    raise FormatError(f"{path}:{lineno}: bad probability {cols[2]!r}") from exc
        return cls(probs)


def train_model1(
    parallel: Sequence[tuple[TokenSeq, TokenSeq]], iterations: int = 5
) -> TranslationTable:
    """EM-train t(target | source) on the parallel corpus.

    Initialization is uniform over co-occurring pairs (plus null -> anything
    co-occurring with it, i.e. every target type). Each iteration accumulates
    expected link counts and renormalizes per source row.
    """
    if not parallel:
        raise ValueError("cannot train on an empty corpus")
    for src, tgt in parallel:
        if not src or not tgt:
            raise ValueError("every sentence pair must have both sides non-empty")

    cooc: dict[str, set[str]] = defaultdict(set)
    for src, tgt in parallel:
        tgt_types = set(tgt)
        cooc[NULL_TOKEN].update(tgt_types)
        for s in set(src):
            cooc[s].update(tgt_types)

    probs: dict[tuple[str, str], float] = {}
    for s in sorted(cooc):
        p0 = 1.0 / len(cooc[s])
        for t in sorted(cooc[s]):
            probs[(s, t)] = p0

    log_likelihoods: list[float] = []
    for _ in range(iterations):
        counts: dict[tuple[str, str], float] = defaultdict(float)
        totals: dict[str, float] = defaultdict(float)
        ll = 0.0
        for src, tgt in parallel:
            sources = [NULL_TOKEN, *src]
            for t in tgt:
                denom = 0.0
                for s in sources:
                    denom += probs[(s, t)]
                denom = max(denom, _PROB_FLOOR)
                ll += math.log(denom) - math.log(len(sources))
                for s in sources:
                    c = probs[(s, t)] / denom
                    counts[(s, t)] += c
                    totals[s] += c
        for key in probs:
            probs[key] = counts[key] / max(totals[key[0]], _PROB_FLOOR)
        log_likelihoods.append(ll)

    return TranslationTable(probs, log_likelihoods)


def viterbi_align(table: TranslationTable, pair: tuple[TokenSeq, TokenSeq]) -> AlignmentMatrix:
    """Best-link alignment: each target position takes its argmax source.

    Ties break toward the smaller source index, and a real position beats the
    null token on an exact tie. Target words whose best probability is zero
    (or whose argmax is null) produce no link.
    """
    src, tgt = pair
    links = set()
    for j, t in enumerate(tgt):
        best_p = 0.0
        best_i: int | None = None
        for i, s in enumerate(src):
            p = table.prob(s, t)
            if p > best_p:
                best_p = p
                best_i = i
        if table.prob(NULL_TOKEN, t) > best_p:
            best_i = None
        if best_i is not None:
            links.add((best_i, j))
    return AlignmentMatrix(source_len=len(src), target_len=len(tgt), links=frozenset(links))


def symmetrize(fwd: AlignmentMatrix, rev: AlignmentMatrix) -> AlignmentMatrix:
    """Grow-diag-final-and combination of forward and reverse alignments.

    ``fwd`` is source-to-target; ``rev`` is target-to-source over the same
    sentence pair and is transposed here before combining. Starts from the
    link intersection, grows along the 8-neighborhood into union links where
    either endpoint is still uncovered, then adds union links whose endpoints
    are both uncovered. Output always sits between intersection and union.
    """
    if (fwd.source_len, fwd.target_len) != (rev.target_len, rev.source_len):
        raise ValueError(
            f"dimension mismatch: fwd {fwd.source_len}x{fwd.target_len}, "
            f"rev {rev.source_len}x{rev.target_len}"
        )
    rev_t = rev.transpose()
    union = fwd.links | rev_t.links
    aligned = set(fwd.links & rev_t.links)
    src_cov = {i for i, _ in aligned}
    tgt_cov = {j for _, j in aligned}

    changed = True
    while changed:
        changed = False
        for (i, j) in sorted(aligned):
            for di, dj in _NEIGHBORS:
                ni, nj = i + di, j + dj
                if (ni, nj) in union and (ni, nj) not in aligned and (
                    ni not in src_cov or nj not in tgt_cov
                ):
                    aligned.add((ni, nj))
                    src_cov.add(ni)
                    tgt_cov.add(nj)
                    changed = True

    for (i, j) in sorted(union):
        if i not in src_cov and j not in tgt_cov:
            aligned.add((i, j))
            src_cov.add(i)
            tgt_cov.add(j)

    return AlignmentMatrix(
        source_len=fwd.source_len, target_len=fwd.target_len, links=frozenset(aligned)
    )
