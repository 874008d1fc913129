"""Structural cleaning filters applied to query-title pairs before similarity scoring.

Filters run in a fixed order (strip -> rank -> token-run collapse -> structural
-> charset) and each dropped pair is attributed to the first filter that
rejects it, so the attrition report always satisfies
``input_count == output_count + sum(dropped)``.
"""
from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from .corpus_io import NormConfig, QueryTitleRecord, TokenSeq, join_tokens, normalize_text, tokenize

DEFAULT_URL_PATTERNS = (r"https?://\S+", r"www\.\S+")

# Filters that can drop a pair, in evaluation order.
FILTER_NAMES = ("rank", "min_chars", "min_tokens", "token_diff", "alnum_ratio", "arabic_ratio")

_ARABIC_RANGES = (
    (0x0600, 0x06FF),
    (0x0750, 0x077F),
    (0xFB50, 0xFDFF),  # presentation forms A
    (0xFE70, 0xFEFF),  # presentation forms B
)


@dataclass(frozen=True)
class PrefilterConfig:
    max_rank: int = 5
    min_chars: int = 20
    min_tokens: int = 3
    max_token_diff: int = 3
    max_token_run: int = 3
    min_alnum_ratio: float = 0.9
    min_arabic_ratio: float = 0.7
    site_blocklist: str | None = None  # None -> packaged default list
    url_patterns: tuple[str, ...] = DEFAULT_URL_PATTERNS
    run_collapse: str = "delete"  # "delete" a long run entirely, or "keep-one" copy
    norm: NormConfig = field(default_factory=NormConfig)

    def __post_init__(self) -> None:
        for name in ("max_rank", "min_chars", "min_tokens", "max_token_diff", "max_token_run"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        for name in ("min_alnum_ratio", "min_arabic_ratio"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        if self.run_collapse not in ("delete", "keep-one"):
            raise ValueError("run_collapse must be 'delete' or 'keep-one'")


@dataclass
class FilterReport:
    """Per-filter drop counts for one cleaning stage."""

    dropped: dict[str, int]
    input_count: int = 0
    output_count: int = 0

    @classmethod
    def empty(cls, filter_names: Sequence[str]) -> "FilterReport":
        return cls(dropped={name: 0 for name in filter_names})

    def record_drop(self, name: str) -> None:
        self.dropped[name] = self.dropped.get(name, 0) + 1

    def merge(self, other: "FilterReport") -> "FilterReport":
        merged = dict(self.dropped)
        for name, n in other.dropped.items():
            merged[name] = merged.get(name, 0) + n
        return FilterReport(
            dropped=merged,
            input_count=self.input_count + other.input_count,
            output_count=self.output_count + other.output_count,
        )

    def check_conservation(self) -> bool:
        return self.input_count == self.output_count + sum(self.dropped.values())

    def to_text(self) -> str:
        lines = [f"{name}\t{count}" for name, count in self.dropped.items()]
        lines.append(f"total_input\t{self.input_count}")
        lines.append(f"total_dropped\t{sum(self.dropped.values())}")
        lines.append(f"total_output\t{self.output_count}")
        return "\n".join(lines) + "\n"

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")


@dataclass(frozen=True)
class CleanPair:
    """A pair that survived prefiltering, with its cleaned texts and tokens."""

    record: QueryTitleRecord
    query_text: str
    title_text: str
    query_tokens: tuple[str, ...]
    title_tokens: tuple[str, ...]


def load_blocklist(path: str | Path | None, norm: NormConfig | None = None) -> frozenset[str]:
    """Read one site name per line ('#' comments), normalized for matching."""
    if path is None:
        text = resources.files("querysmt").joinpath("data/sites.txt").read_text("utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    names = set()
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        normalized = normalize_text(line, norm)
        if normalized:
            names.add(normalized)
    return frozenset(names)


@lru_cache(maxsize=8)
def _compiled(cfg: PrefilterConfig) -> tuple[tuple[re.Pattern[str], ...], tuple[re.Pattern[str], ...]]:
    url_res = tuple(re.compile(p) for p in cfg.url_patterns)
    sites = load_blocklist(cfg.site_blocklist, cfg.norm)
    # Whitespace-delimited occurrences: catches both bare names and the
    # trailing "<separator> <name>" title idiom once punctuation is spaced out.
    site_res = tuple(
        re.compile(r"(?<!\S)" + re.escape(name) + r"(?!\S)")
        for name in sorted(sites, key=len, reverse=True)
    )
    return url_res, site_res


@lru_cache(maxsize=None)
def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch)[0] in ("P", "S")


def is_arabic_char(ch: str) -> bool:
    cp = ord(ch)
    return any(lo <= cp <= hi for lo, hi in _ARABIC_RANGES)


def strip_punct_urls_sites(text: str, cfg: PrefilterConfig) -> str:
    """Replace URLs, blocklisted site names, and punctuation with spaces.

    URLs go first so punctuation removal cannot shred them into surviving
    tokens; the result is whitespace-collapsed.
    """
    url_res, site_res = _compiled(cfg)
    for url_re in url_res:
        text = url_re.sub(" ", text)
    for site_re in site_res:
        text = site_re.sub(" ", text)
    text = "".join(" " if _is_punct(ch) else ch for ch in text)
    return " ".join(text.split())


def keep_top_ranks(records: Iterable[QueryTitleRecord], cfg: PrefilterConfig) -> Iterable[QueryTitleRecord]:
    for record in records:
        if record.rank <= cfg.max_rank:
            yield record


def collapse_repeated_tokens(tokens: Sequence[str], cfg: PrefilterConfig) -> TokenSeq:
    """Remove maximal runs of an identical token longer than ``max_token_run``.

    Runs at or below the limit pass through untouched. With
    ``run_collapse="keep-one"`` a long run leaves a single copy instead.
    """
    out: TokenSeq = []
    i = 0
    n = len(tokens)
    while i < n:
        j = i
        while j < n and tokens[j] == tokens[i]:
            j += 1
        run = j - i
        if run <= cfg.max_token_run:
            out.extend(tokens[i:j])
        elif cfg.run_collapse == "keep-one":
            out.append(tokens[i])
        i = j
    return out


def structural_filter(
    query_text: str,
    query_tokens: Sequence[str],
    title_text: str,
    title_tokens: Sequence[str],
    cfg: PrefilterConfig,
) -> str | None:
    """Length/size gates. Returns the rejecting filter name, or None to keep.

    Character counts include internal spaces of the cleaned text; boundary
    values (exactly min_chars, min_tokens, diff == max_token_diff) are kept.
    """
    if len(query_text) < cfg.min_chars or len(title_text) < cfg.min_chars:
        return "min_chars"
    if len(query_tokens) < cfg.min_tokens or len(title_tokens) < cfg.min_tokens:
        return "min_tokens"
    if abs(len(query_tokens) - len(title_tokens)) > cfg.max_token_diff:
        return "token_diff"
    return None


def charset_filter(text: str, cfg: PrefilterConfig) -> str | None:
    """Script-mix gates over one cleaned text. Returns drop reason or None.

    The alphanumeric ratio is taken over non-whitespace characters; the Arabic
    ratio over alphabetic characters only. Both boundaries are inclusive for
    keeping. Text with no non-whitespace characters is degenerate and dropped.
    """
    content = [ch for ch in text if not ch.isspace()]
    if not content:
        return "alnum_ratio"
    alnum = sum(1 for ch in content if ch.isalnum())
    if alnum / len(content) < cfg.min_alnum_ratio:
        return "alnum_ratio"
    letters = [ch for ch in content if ch.isalpha()]
    if letters:
        arabic = sum(1 for ch in letters if is_arabic_char(ch))
        if arabic / len(letters) < cfg.min_arabic_ratio:
            return "arabic_ratio"
    return None


def prefilter_one(record: QueryTitleRecord, cfg: PrefilterConfig) -> tuple[CleanPair | None, str | None]:
    """Run the full filter chain on one record.

    Returns (clean_pair, None) on keep, (None, filter_name) on drop. Stateless:
    the verdict depends only on the record and the config.
    """
    if record.rank > cfg.max_rank:
        return None, "rank"
    query_text = strip_punct_urls_sites(normalize_text(record.query, cfg.norm), cfg)
    title_text = strip_punct_urls_sites(normalize_text(record.title, cfg.norm), cfg)
    query_tokens = collapse_repeated_tokens(tokenize(query_text), cfg)
    title_tokens = collapse_repeated_tokens(tokenize(title_text), cfg)
    query_text = join_tokens(query_tokens)
    title_text = join_tokens(title_tokens)
    verdict = structural_filter(query_text, query_tokens, title_text, title_tokens, cfg)
    if verdict is not None:
        return None, verdict
    verdict = charset_filter(query_text, cfg) or charset_filter(title_text, cfg)
    if verdict is not None:
        return None, verdict
    pair = CleanPair(
        record=record,
        query_text=query_text,
        title_text=title_text,
        query_tokens=tuple(query_tokens),
        title_tokens=tuple(title_tokens),
    )
    return pair, None


def run_prefilter(
    records: Iterable[QueryTitleRecord], cfg: PrefilterConfig | None = None
) -> tuple[list[CleanPair], FilterReport]:
    """Apply all structural filters, returning survivors and the attrition report."""
    if cfg is None:
        cfg = PrefilterConfig()
    report = FilterReport.empty(FILTER_NAMES)
    kept: list[CleanPair] = []
    for record in records:
        report.input_count += 1
        pair, verdict = prefilter_one(record, cfg)
        if pair is None:
            report.record_drop(verdict or "unknown")
        else:
            kept.append(pair)
    report.output_count = len(kept)
    return kept, report
