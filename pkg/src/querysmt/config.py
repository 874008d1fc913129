"""Pipeline configuration: key = value files, overrides, typed assembly.

Config files are plain text: one `key = value` per line, `#` comments and
blank lines ignored. The same syntax carries `--set key=value` overrides and
the bundle manifest. Precedence when building a config: built-in defaults,
then the config file, then explicit overrides.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

from .corpus_io import NormConfig
from .decoder import FEATURE_NAMES, DecodeParams, FeatureWeights
from .prefilter import PrefilterConfig
from .simfilter import SimFilterConfig


class ConfigError(ValueError):
    """Bad config file, unknown key, or unparsable value."""


@dataclass(frozen=True)
class PipelineConfig:
    """Everything train_all needs, flattened into one object."""

    raw_tsv: str = ""
    workdir: str = ""
    seed: int = 42
    threads: int = 1
    dev_fraction: float = 0.1
    dev_cap: int = 500
    align_iterations: int = 5
    max_phrase_len: int = 5
    prune_max_count: int = 3
    lm_discount: float = 0.75
    lm_min_count: int = 1
    mert_max_iters: int = 8
    mert_nbest: int = 100
    mert_min_gain: float = 1e-4
    prefilter: PrefilterConfig = field(default_factory=PrefilterConfig)
    simfilter: SimFilterConfig = field(default_factory=SimFilterConfig)
    weights: FeatureWeights = field(default_factory=FeatureWeights)
    decode: DecodeParams = field(default_factory=DecodeParams)

    @property
    def norm(self) -> NormConfig:
        return self.prefilter.norm


def parse_kv_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Parse `key = value` lines into an ordered dict."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        out[key] = value
    return out


def parse_kv_file(path: str | Path) -> dict[str, str]:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    return parse_kv_text(p.read_text(encoding="utf-8"), source=str(p))


def write_kv_file(path: str | Path, items: dict[str, str]) -> None:
    lines = [f"{k} = {v}" for k, v in items.items()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _to_bool(key: str, value: str) -> bool:
    low = value.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {value!r}")


def _to_int(key: str, value: str) -> int:
    try:
        return int(value)
    except ValueError as exc:
        raise ConfigError(f"{key}: expected an integer, got {value!r}") from exc


def _to_float(key: str, value: str) -> float:
    try:
        return float(value)
    except ValueError as exc:
        raise ConfigError(f"{key}: expected a number, got {value!r}") from exc


_PIPELINE_INT = {
    "seed", "threads", "dev_cap", "align_iterations", "max_phrase_len",
    "prune_max_count", "lm_min_count", "mert_max_iters", "mert_nbest",
}
_PIPELINE_FLOAT = {"dev_fraction", "lm_discount", "mert_min_gain"}
_PIPELINE_STR = {"raw_tsv", "workdir"}

_PREFILTER_INT = {"max_rank", "min_chars", "min_tokens", "max_token_diff", "max_token_run"}
_PREFILTER_FLOAT = {"min_alnum_ratio", "min_arabic_ratio"}
_PREFILTER_STR = {"run_collapse", "site_blocklist"}

_NORM_BOOL = {
    "strip_diacritics", "strip_tatweel", "lowercase_latin", "arabic_letter_unification",
}
_NORM_STR = {"unicode_form"}

_SIM_FLOAT = {"min_jaccard", "min_cosine", "max_cosine"}
_SIM_INT = {"embed_timeout_ms", "embed_retries", "fallback_dim"}
_SIM_STR = {"provider", "embed_url"}

_DECODE_INT = {"beam_size", "distortion_limit", "nbest_size"}

_WEIGHT_KEYS = {f"weights.{name}": name for name in FEATURE_NAMES}


def apply_kv(base: PipelineConfig, kv: dict[str, str]) -> PipelineConfig:
    """Overlay key = value pairs on a config. Unknown keys are rejected."""
    pipeline: dict = {}
    prefilter: dict = {}
    norm: dict = {}
    sim: dict = {}
    dec: dict = {}
    weights: dict = {}
    for key, value in kv.items():
        if key in _PIPELINE_INT:
            pipeline[key] = _to_int(key, value)
        elif key in _PIPELINE_FLOAT:
            pipeline[key] = _to_float(key, value)
        elif key in _PIPELINE_STR:
            pipeline[key] = value
        elif key in _PREFILTER_INT:
            prefilter[key] = _to_int(key, value)
        elif key in _PREFILTER_FLOAT:
            prefilter[key] = _to_float(key, value)
        elif key in _PREFILTER_STR:
            # empty site_blocklist means "use the packaged default list"
            prefilter[key] = (value or None) if key == "site_blocklist" else value
        elif key in _NORM_BOOL:
            norm[key] = _to_bool(key, value)
        elif key in _NORM_STR:
            norm[key] = value
        elif key in _SIM_FLOAT:
            sim[key] = _to_float(key, value)
        elif key in _SIM_INT:
            sim[key] = _to_int(key, value)
        elif key in _SIM_STR:
            sim[key] = value
        elif key in _DECODE_INT:
            dec[key] = _to_int(key, value)
        elif key in _WEIGHT_KEYS:
            weights[_WEIGHT_KEYS[key]] = _to_float(key, value)
        else:
            raise ConfigError(f"unknown config key: {key}")

    cfg = base
    try:
        if norm:
            new_norm = replace(cfg.prefilter.norm, **norm)
            prefilter["norm"] = new_norm
        if prefilter:
            cfg = replace(cfg, prefilter=replace(cfg.prefilter, **prefilter))
        if sim:
            cfg = replace(cfg, simfilter=replace(cfg.simfilter, **sim))
        if dec:
            cfg = replace(cfg, decode=replace(cfg.decode, **dec))
        if weights:
            cfg = replace(cfg, weights=replace(cfg.weights, **weights))
        if pipeline:
            cfg = replace(cfg, **pipeline)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def load_config(
    path: str | Path | None = None, overrides: dict[str, str] | None = None
) -> PipelineConfig:
    """Defaults, overlaid with the config file, overlaid with overrides."""
    cfg = PipelineConfig()
    if path is not None:
        cfg = apply_kv(cfg, parse_kv_file(path))
    if overrides:
        cfg = apply_kv(cfg, overrides)
    return cfg
