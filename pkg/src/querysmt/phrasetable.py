"""Phrase pair extraction, scoring, pruning, and the phrase table text format.

Extraction collects every phrase pair consistent with a word alignment: the
links inside the source span land inside the target span and vice versa, with
at least one link inside the box. Unaligned target words adjacent to the
minimal target span produce additional pairs.

Scores per pair: relative frequencies in both directions plus lexical weights
computed from the Model 1 tables, taking the best-scoring link per token
(null included).
"""
from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple

from .align import NULL_TOKEN, AlignmentMatrix, TranslationTable
from .corpus_io import TokenSeq
from .errors import FormatError

_DELIM = " ||| "


class PhrasePair(NamedTuple):
    source: tuple[str, ...]
    target: tuple[str, ...]


@dataclass(frozen=True)
class PhraseEntry:
    """Scores for one phrase pair: joint count, forward/reverse relative
    frequencies, forward/reverse lexical weights."""

    count: int
    phi_fwd: float
    phi_rev: float
    lex_fwd: float
    lex_rev: float


@dataclass(frozen=True)
class PruneReport:
    removed: int
    retained: int
    max_dropped_count: int


class PhraseTable:
    """Scored phrase pairs indexed by source phrase for decoding."""

    def __init__(self, entries: dict[PhrasePair, PhraseEntry]):
        self.entries = entries
        self.by_source: dict[tuple[str, ...], list[tuple[tuple[str, ...], PhraseEntry]]] = defaultdict(list)
        for pair in sorted(entries):
            self.by_source[pair.source].append((pair.target, entries[pair]))
        self.by_source.default_factory = None
        self.max_source_len = max((len(s) for s in self.by_source), default=0)

    def __len__(self) -> int:
        return len(self.entries)

    def lookup(self, source: tuple[str, ...]) -> list[tuple[tuple[str, ...], PhraseEntry]]:
        return self.by_source.get(source, [])


def extract_phrases(
    pair: tuple[TokenSeq, TokenSeq], alignment: AlignmentMatrix, max_len: int = 5
) -> Counter[PhrasePair]:
    """All consistent phrase pairs up to max_len words per side, with counts.

    A sentence pair with no links yields nothing. Each source span with at
    least one link projects to its minimal target span; if no outside link
    points into that span, the pair and its extensions over neighboring
    unaligned target words are emitted.
    """
    src, tgt = pair
    if (len(src), len(tgt)) != (alignment.source_len, alignment.target_len):
        raise ValueError("alignment dimensions do not match the sentence pair")
    if max_len < 1:
        raise ValueError("max_len must be >= 1")

    links = sorted(alignment.links)
    aligned_tgt = {j for _, j in links}
    out: Counter[PhrasePair] = Counter()

    for i1 in range(len(src)):
        for i2 in range(i1, min(i1 + max_len, len(src))):
            span_js = [j for (i, j) in links if i1 <= i <= i2]
            if not span_js:
                continue
            j1, j2 = min(span_js), max(span_js)
            if any(j1 <= j <= j2 and not (i1 <= i <= i2) for (i, j) in links):
                continue
            jj1 = j1
            while jj1 >= 0 and (jj1 == j1 or jj1 not in aligned_tgt):
                jj2 = j2
                while jj2 < len(tgt) and (jj2 == j2 or jj2 not in aligned_tgt):
                    if jj2 - jj1 + 1 <= max_len:
                        out[PhrasePair(tuple(src[i1 : i2 + 1]), tuple(tgt[jj1 : jj2 + 1]))] += 1
                    jj2 += 1
                jj1 -= 1
    return out


def _lex_weight(
    out_tokens: tuple[str, ...], in_tokens: tuple[str, ...], table: TranslationTable
) -> float:
    """Product over output tokens of the best t(token | input token or null)."""
    w = 1.0
    for t in out_tokens:
        best = table.prob(NULL_TOKEN, t)
        for s in in_tokens:
            p = table.prob(s, t)
            if p > best:
                best = p
        w *= best
    return w


def score_phrase_table(
    extracted: Counter[PhrasePair], fwd: TranslationTable, rev: TranslationTable
) -> PhraseTable:
    """Relative-frequency and lexical-weight scores from pooled pair counts.

    fwd is the source-to-target Model 1 table (used for lex(t|s)); rev is
    target-to-source (used for lex(s|t)). Forward relative frequencies
    normalize per source phrase, reverse per target phrase.
    """
    if not extracted:
        raise ValueError("cannot score an empty extraction")
    src_totals: dict[tuple[str, ...], int] = defaultdict(int)
    tgt_totals: dict[tuple[str, ...], int] = defaultdict(int)
    for pair, count in extracted.items():
        if count <= 0:
            raise ValueError(f"non-positive count for {pair}")
        src_totals[pair.source] += count
        tgt_totals[pair.target] += count

    entries: dict[PhrasePair, PhraseEntry] = {}
    for pair in sorted(extracted):
        count = extracted[pair]
        entries[pair] = PhraseEntry(
            count=count,
            phi_fwd=count / src_totals[pair.source],
            phi_rev=count / tgt_totals[pair.target],
            lex_fwd=_lex_weight(pair.target, pair.source, fwd),
            lex_rev=_lex_weight(pair.source, pair.target, rev),
        )
    return PhraseTable(entries)


def prune(table: PhraseTable, max_dropped_count: int = 3) -> tuple[PhraseTable, PruneReport]:
    """Drop entries whose joint count is at or below the threshold.

    Surviving scores are kept as-is (no renormalization). Pruning twice with
    the same threshold is a no-op the second time.
    """
    if max_dropped_count < 0:
        raise ValueError("max_dropped_count must be >= 0")
    kept = {pair: e for pair, e in table.entries.items() if e.count > max_dropped_count}
    report = PruneReport(
        removed=len(table.entries) - len(kept),
        retained=len(kept),
        max_dropped_count=max_dropped_count,
    )
    return PhraseTable(kept), report


def save_table(table: PhraseTable, path: str | Path) -> None:
    """Write `source ||| target ||| phi_fwd lex_fwd phi_rev lex_rev ||| count`
    lines sorted by source then target phrase."""
    lines = []
    for pair in sorted(table.entries):
        src = " ".join(pair.source)
        tgt = " ".join(pair.target)
        if "|||" in src or "|||" in tgt:
            raise ValueError(f"phrase contains the field delimiter: {pair}")
        e = table.entries[pair]
        scores = f"{e.phi_fwd:.9g} {e.lex_fwd:.9g} {e.phi_rev:.9g} {e.lex_rev:.9g}"
        lines.append(f"{src}{_DELIM}{tgt}{_DELIM}{scores}{_DELIM}{e.count}")
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def load_table(path: str | Path) -> PhraseTable:
    entries: dict[PhrasePair, PhraseEntry] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split(_DELIM)
            if len(fields) != 4:
                raise FormatError(f"{path}:{lineno}: expected 4 delimited fields, got {len(fields)}")
            src_text, tgt_text, score_text, count_text = fields
            src = tuple(src_text.split())
            tgt = tuple(tgt_text.split())
            if not src or not tgt:
                raise FormatError(f"{path}:{lineno}: empty phrase")
            scores = score_text.split()
            if len(scores) != 4:
                raise FormatError(f"{path}:{lineno}: expected 4 scores, got {len(scores)}")
            try:
                phi_fwd, lex_fwd, phi_rev, lex_rev = (float(x) for x in scores)
                count = int(count_text)
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: bad numeric field") from exc
            pair = PhrasePair(src, tgt)
            if pair in entries:
                raise FormatError(f"{path}:{lineno}: duplicate phrase pair")
            entries[pair] = PhraseEntry(
                count=count, phi_fwd=phi_fwd, phi_rev=phi_rev, lex_fwd=lex_fwd, lex_rev=lex_rev
            )
    return PhraseTable(entries)


def pool_extractions(per_pair: Iterable[Counter[PhrasePair]]) -> Counter[PhrasePair]:
    """Sum per-sentence extraction counts into one corpus-level multiset."""
    total: Counter[PhrasePair] = Counter()
    for counts in per_pair:
        total.update(counts)
    return total
