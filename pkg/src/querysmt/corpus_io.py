"""Raw query-title ingestion, text normalization, and parallel corpus output.

The pipeline consumes UTF-8 TSV rows (query, title, rank) and emits a pair of
line-aligned plain-text files: one tokenized sentence per line, line i of the
source file corresponding to line i of the target file.
"""
from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

# A token sequence is a plain list of non-empty, whitespace-free strings.
TokenSeq = list[str]

_WS_RE = re.compile(r"\s+")
# Arabic short vowels / tanween / shadda / sukun
_AR_DIACRITICS_RE = re.compile(r"[ً-ْ]")
_TATWEEL = "ـ"
# Combining hamza/madda marks; dropped alongside letter unification so that
# recomposition cannot reintroduce a unified-away alef variant.
_AR_HAMZA_MARKS_RE = re.compile(r"[ٓ-ٕ]")
_AR_UNIFY = str.maketrans({
    "أ": "ا",  # alef hamza above
    "إ": "ا",  # alef hamza below
    "آ": "ا",  # alef madda
    "ٱ": "ا",  # alef wasla
    "ى": "ي",  # alef maqsura -> yeh
    "ة": "ه",  # teh marbuta -> heh
})


@dataclass(frozen=True)
class NormConfig:
    """Switches for the text normalization pass. Defaults are pipeline defaults."""

    strip_diacritics: bool = True
    strip_tatweel: bool = True
    unicode_form: str = "NFC"
    lowercase_latin: bool = True
    arabic_letter_unification: bool = True


@dataclass(frozen=True)
class QueryTitleRecord:
    """One raw (query, title, rank) row. query/title are non-empty, rank >= 1."""

    query: str
    title: str
    rank: int
    id: str = ""


@dataclass
class LoadStats:
    rows: int = 0
    malformed: int = 0


@dataclass
class WriteCounts:
    written: int = 0
    dropped: int = 0


def normalize_text(text: str, cfg: NormConfig | None = None) -> str:
    """Canonicalize a query or title string.

    Applies the configured Unicode normalization form, strips Arabic diacritics
    and tatweel, unifies common Arabic letter variants, lowercases, collapses
    whitespace runs to single spaces, and trims. Idempotent for every input:
    the output is re-normalized so no character-level edit can expose a new
    canonical composition.
    """
    if cfg is None:
        cfg = NormConfig()
    if not text:
        return ""
    out = unicodedata.normalize(cfg.unicode_form, text)
    if cfg.strip_tatweel:
        out = out.replace(_TATWEEL, "")
    if cfg.strip_diacritics:
        out = _AR_DIACRITICS_RE.sub("", out)
    if cfg.arabic_letter_unification:
        out = _AR_HAMZA_MARKS_RE.sub("", out)
        out = out.translate(_AR_UNIFY)
    if cfg.lowercase_latin:
        out = out.lower()
    out = unicodedata.normalize(cfg.unicode_form, out)
    out = _WS_RE.sub(" ", out).strip()
    return out


def tokenize(text: str) -> TokenSeq:
    """Split normalized text on whitespace. Empty input yields an empty sequence."""
    return text.split()


def join_tokens(tokens: Sequence[str]) -> str:
    return " ".join(tokens)


def load_raw_pairs(path: str | Path, stats: LoadStats | None = None) -> Iterator[QueryTitleRecord]:
    """Stream well-formed records from a query<TAB>title<TAB>rank TSV file.

    Malformed rows (wrong column count, empty query/title, non-integer or
    non-positive rank) are counted in ``stats`` and skipped; input order is
    preserved. An unreadable file raises OSError.
    """
    if stats is None:
        stats = LoadStats()
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line:
                continue
            stats.rows += 1
            cols = line.split("\t")
            if len(cols) != 3:
                stats.malformed += 1
                continue
            query, title, rank_s = cols
            try:
                rank = int(rank_s)
            except ValueError:
                stats.malformed += 1
                continue
            if rank < 1 or not query.strip() or not title.strip():
                stats.malformed += 1
                continue
            yield QueryTitleRecord(query=query, title=title, rank=rank, id=str(lineno))


def write_parallel(
    pairs: Iterable[tuple[Sequence[str], Sequence[str]]],
    src_path: str | Path,
    tgt_path: str | Path,
) -> WriteCounts:
    """Write line-aligned source/target corpus files from token-sequence pairs.

    Pairs with an empty side are dropped (counted), keeping the two files at
    identical line counts. Tokens are joined with single spaces, LF endings.
    """
    counts = WriteCounts()
    with open(src_path, "w", encoding="utf-8", newline="\n") as src_fh, \
            open(tgt_path, "w", encoding="utf-8", newline="\n") as tgt_fh:
        for src_tokens, tgt_tokens in pairs:
            if not src_tokens or not tgt_tokens:
                counts.dropped += 1
                continue
            src_fh.write(join_tokens(src_tokens) + "\n")
            tgt_fh.write(join_tokens(tgt_tokens) + "\n")
            counts.written += 1
    return counts


def read_parallel(src_path: str | Path, tgt_path: str | Path) -> list[tuple[TokenSeq, TokenSeq]]:
    """Load a parallel corpus written by :func:`write_parallel`.

    Raises ValueError if the two files have different line counts.
    """
    with open(src_path, encoding="utf-8") as fh:
        src_lines = fh.read().splitlines()
    with open(tgt_path, encoding="utf-8") as fh:
        tgt_lines = fh.read().splitlines()
    if len(src_lines) != len(tgt_lines):
        raise ValueError(
            f"parallel corpus line count mismatch: {src_path} has {len(src_lines)}, "
            f"{tgt_path} has {len(tgt_lines)}"
        )
    return [(s.split(), t.split()) for s, t in zip(src_lines, tgt_lines)]
