"""End-to-end orchestration: training pipeline, inference rule, evaluation.

Inference scans the 5-best list in rank order and returns the first
hypothesis that differs from the (normalized) input query; when every
hypothesis equals the input it falls back to the last one available.

train_all runs the full pipeline as named stages, each persisting its
artifacts and report under the work directory so a rerun with resume=True
picks up after the last completed stage:

    prep     prefilter + similarity gate + dev split + parallel files
    align    IBM Model 1 in both directions
    phrases  extraction, scoring, pruning
    lm       trigram LM on the title side, binary format
    tune     MERT on the dev split
    bundle   manifest tying the artifacts together
"""
from __future__ import annotations

import enum
import hashlib
import time
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .align import TranslationTable, symmetrize, train_model1, viterbi_align
from .config import PipelineConfig, parse_kv_file, write_kv_file
from .corpus_io import (
    LoadStats,
    NormConfig,
    join_tokens,
    load_raw_pairs,
    normalize_text,
    read_parallel,
    tokenize,
    write_parallel,
)
from .decoder import FEATURE_NAMES, DecodeParams, FeatureWeights, ModelBundle, decode
from .errors import FormatError, PipelineError
from .lm import count_ngrams, estimate_kneser_ney, load_binary, save_binary
from .mert import mert_tune
from .phrasetable import load_table, prune, save_table, score_phrase_table, extract_phrases
from .prefilter import run_prefilter
from .simfilter import run_simfilter


class ErrorType(str, enum.Enum):
    """Closed label set for human evaluation of rewrites."""

    CHANGE_INTENTION = "change-intention"
    CHANGE_NUMBERS = "change-numbers"
    DELETE_WORDS = "delete-words"
    CHANGE_LOCATION = "change-location"
    ADD_REDUNDANT_WORDS = "add-redundant-words"
    NORMALIZATION_PROBLEM = "normalization-problem"
    GOOD = "good"


@dataclass(frozen=True)
class RewriteResult:
    original: str
    rewritten: str
    chosen_rank: int
    identical: bool
    nbest_size: int
    latency: float

    def __post_init__(self) -> None:
        if self.latency < 0:
            raise ValueError("latency must be >= 0")


def pick_rewrite(surfaces: Sequence[str], source: str) -> tuple[int, str]:
    """The rank-order identity-skip rule over n-best surfaces.

    Returns (1-based rank, surface) of the first entry differing from the
    source; if none differs, the last entry.
    """
    if not surfaces:
        raise ValueError("empty n-best list")
    for rank, surface in enumerate(surfaces, start=1):
        if surface != source:
            return rank, surface
    return len(surfaces), surfaces[-1]


def rewrite(query: str, bundle: ModelBundle) -> RewriteResult:
    """Normalize, decode, and apply the identity-skip rule to one query.

    Latency covers decoding and the n-best scan only, not normalization or
    model load.
    """
    tokens = tokenize(normalize_text(query, bundle.norm))
    if not tokens:
        raise ValueError("query is empty after normalization")
    source_surface = join_tokens(tokens)
    t0 = time.perf_counter()
    nbest = decode(bundle, tokens)
    rank, surface = pick_rewrite([e.surface for e in nbest], source_surface)
    latency = time.perf_counter() - t0
    return RewriteResult(
        original=query,
        rewritten=surface,
        chosen_rank=rank,
        identical=(surface == source_surface),
        nbest_size=len(nbest),
        latency=latency,
    )


@dataclass
class EvalReport:
    """Label bookkeeping for a batch of rewrites; labels are supplied by
    annotators, never inferred."""

    rows: list[tuple[str, str, int, str]]
    counts: dict[str, int]

    @property
    def total(self) -> int:
        return len(self.rows)

    @property
    def good_fraction(self) -> float:
        if not self.rows:
            return 0.0
        return self.counts.get(ErrorType.GOOD.value, 0) / len(self.rows)

    def to_tsv(self) -> str:
        return "".join(f"{q}\t{r}\t{rank}\t{label}\n" for q, r, rank, label in self.rows)


def evaluate_batch(
    pairs: Sequence[tuple[str, str | ErrorType]], bundle: ModelBundle
) -> EvalReport:
    """Rewrite labeled queries and tally the labels."""
    labels = [ErrorType(label) for _, label in pairs]
    rows: list[tuple[str, str, int, str]] = []
    counts: Counter[str] = Counter()
    for (query, _), label in zip(pairs, labels):
        result = rewrite(query, bundle)
        rows.append((query, result.rewritten, result.chosen_rank, label.value))
        counts[label.value] += 1
    return EvalReport(rows=rows, counts=dict(counts))


_STAGE_FILES = {
    "prep": ("prefilter_report.txt", "simfilter_report.txt", "train.src", "train.tgt", "dev.src", "dev.tgt"),
    "align": ("model1_fwd.tsv", "model1_rev.tsv", "align_report.txt"),
    "phrases": ("phrase_table.full.txt", "phrase_table.txt", "phrases_report.txt"),
    "lm": ("lm.qrlm", "lm_report.txt"),
    "tune": ("weights.txt", "tuning_log.tsv"),
    "bundle": ("bundle.manifest",),
}

_MANIFEST_FORMAT = "querysmt-bundle-1"


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _stage_prep(cfg: PipelineConfig, wd: Path) -> None:
    stats = LoadStats()
    records = load_raw_pairs(cfg.raw_tsv, stats)
    kept_pre, pre_report = run_prefilter(records, cfg.prefilter)
    pre_report.write(wd / "prefilter_report.txt")
    if not kept_pre:
        raise PipelineError(
            "prep",
            f"prefilter dropped all {pre_report.input_count} records; "
            f"see {wd / 'prefilter_report.txt'}",
        )
    kept_sim, sim_report = run_simfilter(kept_pre, cfg.simfilter)
    sim_report.write(wd / "simfilter_report.txt")
    if not kept_sim:
        raise PipelineError(
            "prep",
            f"similarity gate dropped all {sim_report.input_count} pairs; "
            f"see {wd / 'simfilter_report.txt'}",
        )

    rng = np.random.default_rng(cfg.seed)
    dev_n = min(int(len(kept_sim) * cfg.dev_fraction), cfg.dev_cap)
    dev_idx = set(rng.permutation(len(kept_sim))[:dev_n].tolist())
    train_pairs = [
        (p.query_tokens, p.title_tokens) for i, p in enumerate(kept_sim) if i not in dev_idx
    ]
    dev_pairs = [
        (p.query_tokens, p.title_tokens) for i, p in enumerate(kept_sim) if i in dev_idx
    ]
    if not train_pairs:
        raise PipelineError("prep", "dev split left no training pairs; lower dev_fraction")
    write_parallel(train_pairs, wd / "train.src", wd / "train.tgt")
    write_parallel(dev_pairs, wd / "dev.src", wd / "dev.tgt")


def _stage_align(cfg: PipelineConfig, wd: Path) -> None:
    train = read_parallel(wd / "train.src", wd / "train.tgt")
    fwd = train_model1(train, cfg.align_iterations)
    rev = train_model1([(t, s) for s, t in train], cfg.align_iterations)
    fwd.save(wd / "model1_fwd.tsv")
    rev.save(wd / "model1_rev.tsv")
    lines = ["direction\titeration\tlog_likelihood"]
    for name, table in (("fwd", fwd), ("rev", rev)):
        for i, ll in enumerate(table.log_likelihoods):
            lines.append(f"{name}\t{i}\t{ll:.6f}")
    (wd / "align_report.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def _stage_extract(cfg: PipelineConfig, wd: Path) -> None:
    train = read_parallel(wd / "train.src", wd / "train.tgt")
    fwd = TranslationTable.load(wd / "model1_fwd.tsv")
    rev = TranslationTable.load(wd / "model1_rev.tsv")
    extracted: Counter = Counter()
    for src, tgt in train:
        fwd_align = viterbi_align(fwd, (src, tgt))
        rev_align = viterbi_align(rev, (tgt, src))
        sym = symmetrize(fwd_align, rev_align)
        extracted.update(extract_phrases((src, tgt), sym, cfg.max_phrase_len))
    if not extracted:
        raise PipelineError("phrases", "no phrase pairs extracted from the training corpus")
    full = score_phrase_table(extracted, fwd, rev)
    save_table(full, wd / "phrase_table.full.txt")


def _stage_prune(cfg: PipelineConfig, wd: Path) -> None:
    full = load_table(wd / "phrase_table.full.txt")
    pruned, report = prune(full, cfg.prune_max_count)
    if not pruned.entries:
        raise PipelineError(
            "phrases",
            f"pruning at count <= {cfg.prune_max_count} removed all {report.removed} phrase pairs",
        )
    save_table(pruned, wd / "phrase_table.txt")
    (wd / "phrases_report.txt").write_text(
        f"extracted\t{len(full)}\nremoved\t{report.removed}\nretained\t{report.retained}\n"
        f"max_dropped_count\t{report.max_dropped_count}\n",
        encoding="utf-8",
    )


def _stage_phrases(cfg: PipelineConfig, wd: Path) -> None:
    _stage_extract(cfg, wd)
    _stage_prune(cfg, wd)


def _stage_lm(cfg: PipelineConfig, wd: Path) -> None:
    train = read_parallel(wd / "train.src", wd / "train.tgt")
    counts = count_ngrams(tgt for _, tgt in train)
    model = estimate_kneser_ney(counts, discount=cfg.lm_discount, min_count=cfg.lm_min_count)
    save_binary(model, wd / "lm.qrlm")
    (wd / "lm_report.txt").write_text(
        f"sentences\t{counts.total_sentences}\nvocab\t{model.vocab_size}\n"
        f"unigrams\t{len(counts.unigrams)}\nbigrams\t{len(counts.bigrams)}\n"
        f"trigrams\t{len(counts.trigrams)}\n",
        encoding="utf-8",
    )


def _stage_tune(cfg: PipelineConfig, wd: Path) -> None:
    dev = read_parallel(wd / "dev.src", wd / "dev.tgt")
    weights = cfg.weights
    if dev:
        bundle = ModelBundle(
            phrase_table=load_table(wd / "phrase_table.txt"),
            lm=load_binary(wd / "lm.qrlm"),
            weights=cfg.weights,
            params=cfg.decode,
            norm=cfg.norm,
        )
        result = mert_tune(
            bundle,
            dev,
            max_iters=cfg.mert_max_iters,
            nbest=cfg.mert_nbest,
            seed=cfg.seed,
            min_gain=cfg.mert_min_gain,
            log_path=wd / "tuning_log.tsv",
        )
        weights = result.weights
    else:
        (wd / "tuning_log.tsv").write_text("", encoding="utf-8")
    write_kv_file(
        wd / "weights.txt",
        {f"weights.{name}": f"{getattr(weights, name):.17g}" for name in FEATURE_NAMES},
    )


def _stage_bundle(cfg: PipelineConfig, wd: Path, timings: dict[str, float]) -> None:
    weights_kv = parse_kv_file(wd / "weights.txt")
    manifest: dict[str, str] = {
        "format": _MANIFEST_FORMAT,
        "phrase_table": "phrase_table.txt",
        "lm": "lm.qrlm",
        "seed": str(cfg.seed),
        "beam_size": str(cfg.decode.beam_size),
        "distortion_limit": str(cfg.decode.distortion_limit),
        "nbest_size": str(cfg.decode.nbest_size),
    }
    manifest.update(weights_kv)
    norm = cfg.norm
    manifest["norm.strip_diacritics"] = str(norm.strip_diacritics).lower()
    manifest["norm.strip_tatweel"] = str(norm.strip_tatweel).lower()
    manifest["norm.unicode_form"] = norm.unicode_form
    manifest["norm.lowercase_latin"] = str(norm.lowercase_latin).lower()
    manifest["norm.arabic_letter_unification"] = str(norm.arabic_letter_unification).lower()
    manifest["sha256.phrase_table"] = _sha256(wd / "phrase_table.txt")
    manifest["sha256.lm"] = _sha256(wd / "lm.qrlm")
    # Wall-clock timings go to a side file so the manifest (and with it the
    # whole artifact set) is byte-identical across same-seed reruns.
    write_kv_file(wd / "timings.txt", {f"seconds.{k}": f"{v:.3f}" for k, v in timings.items()})
    write_kv_file(wd / "bundle.manifest", manifest)


def train_all(
    cfg: PipelineConfig,
    resume: bool = False,
    log: Callable[[str], None] | None = None,
) -> ModelBundle:
    """Run every pipeline stage and return the loaded bundle.

    With resume=True, stages whose artifacts already exist are skipped; the
    bundle manifest is always rewritten so it reflects the final artifact
    set. Any stage failure raises PipelineError naming the stage, leaving
    completed artifacts in place.
    """
    say = log if log is not None else (lambda msg: None)
    if not cfg.raw_tsv:
        raise PipelineError("prep", "config has no raw_tsv input path")
    if not cfg.workdir:
        raise PipelineError("prep", "config has no workdir")
    wd = Path(cfg.workdir)
    wd.mkdir(parents=True, exist_ok=True)

    stages: list[tuple[str, Callable[[], None]]] = [
        ("prep", lambda: _stage_prep(cfg, wd)),
        ("align", lambda: _stage_align(cfg, wd)),
        ("phrases", lambda: _stage_phrases(cfg, wd)),
        ("lm", lambda: _stage_lm(cfg, wd)),
        ("tune", lambda: _stage_tune(cfg, wd)),
    ]
    timings: dict[str, float] = {}
    for name, fn in stages:
        if resume and all((wd / f).exists() for f in _STAGE_FILES[name]):
            say(f"[{name}] artifacts present, skipping")
            continue
        say(f"[{name}] running")
        t0 = time.perf_counter()
        try:
            fn()
        except PipelineError:
            raise
        except Exception as exc:
            raise PipelineError(name, str(exc)) from exc
        timings[name] = time.perf_counter() - t0
        say(f"[{name}] done in {timings[name]:.2f}s")

    try:
        _stage_bundle(cfg, wd, timings)
    except PipelineError:
        raise
    except Exception as exc:
        raise PipelineError("bundle", str(exc)) from exc
    say("[bundle] manifest written")
    return load_bundle(wd)


def load_bundle(workdir: str | Path) -> ModelBundle:
    """Load a trained bundle from its manifest, verifying artifact hashes."""
    wd = Path(workdir)
    manifest_path = wd / "bundle.manifest"
    if not manifest_path.is_file():
        raise FormatError(f"no bundle manifest at {manifest_path}")
    manifest = parse_kv_file(manifest_path)
    if manifest.get("format") != _MANIFEST_FORMAT:
        raise FormatError(f"unsupported bundle format: {manifest.get('format')!r}")
    for artifact in ("phrase_table", "lm"):
        path = wd / manifest[artifact]
        digest = _sha256(path)
        if digest != manifest[f"sha256.{artifact}"]:
            raise FormatError(f"{path}: sha256 mismatch, bundle artifact was modified")

    def flag(key: str) -> bool:
        return manifest[key] == "true"

    weights = FeatureWeights(
        **{name: float(manifest[f"weights.{name}"]) for name in FEATURE_NAMES}
    )
    params = DecodeParams(
        beam_size=int(manifest["beam_size"]),
        distortion_limit=int(manifest["distortion_limit"]),
        nbest_size=int(manifest["nbest_size"]),
    )
    norm = NormConfig(
        strip_diacritics=flag("norm.strip_diacritics"),
        strip_tatweel=flag("norm.strip_tatweel"),
        unicode_form=manifest["norm.unicode_form"],
        lowercase_latin=flag("norm.lowercase_latin"),
        arabic_letter_unification=flag("norm.arabic_letter_unification"),
    )
    return ModelBundle(
        phrase_table=load_table(wd / manifest["phrase_table"]),
        lm=load_binary(wd / manifest["lm"]),
        weights=weights,
        params=params,
        norm=norm,
    )
