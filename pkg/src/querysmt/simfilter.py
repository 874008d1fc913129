"""Semantic affinity gating of query-title pairs.

Two scores decide whether a pair carries a usable rewrite signal: the Jaccard
index over light-stemmed token sets, and the cosine similarity of sentence
embeddings. Pairs that are identical, too unrelated, or near-duplicates are
dropped. Embeddings come from a pluggable provider: a deterministic hashed
character-trigram fallback that needs no external service, or a remote HTTP
service speaking the shared /embed protocol.
"""
from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Protocol, Sequence

import numpy as np
import requests

from .prefilter import CleanPair, FilterReport, is_arabic_char

SIM_FILTER_NAMES = ("identical", "jaccard", "cosine_low", "cosine_high")

# Prefix classes stripped in order, at most one per class; residual >= 2 chars.
_CONJUNCTIONS = ("و", "ف")  # waw, feh
_PREPOSITIONS = ("ب", "ك", "ل")  # beh, kaf, lam
_ARTICLES = ("ال", "لل")  # al-, lil-
# Suffixes, longest first as listed; at most one stripped, residual >= 2.
_SUFFIXES = ("ها", "ان", "ات", "ون", "ين", "يه", "ية", "ه", "ة", "ي")

_MIN_STEM_RESIDUAL = 2


class ProviderError(RuntimeError):
    """Raised when an embedding provider cannot serve a batch."""


@dataclass
class SimCounters:
    zero_vectors: int = 0


# Degenerate-input tallies (zero embedding vectors); benign, reset per run if needed.
counters = SimCounters()


@dataclass(frozen=True)
class SimFilterConfig:
    min_jaccard: float = 0.35
    min_cosine: float = 0.5
    max_cosine: float = 0.9
    provider: str = "fallback"  # "fallback" or "remote"
    embed_url: str = "http://127.0.0.1:8941"
    embed_timeout_ms: int = 5000
    embed_retries: int = 2
    fallback_dim: int = 256

    def __post_init__(self) -> None:
        if not 0.0 <= self.min_jaccard <= 1.0:
            raise ValueError("min_jaccard must be in [0, 1]")
        if not 0.0 <= self.min_cosine <= self.max_cosine <= 1.0:
            raise ValueError("cosine bounds must satisfy 0 <= min <= max <= 1")


def stem(token: str) -> str:
    """Rule-based Arabic light stem of a normalized token.

    Strips at most one conjunction (و/ف), one preposition (ب/ك/ل), and one
    article (ال/لل) prefix in that order, then at most one common suffix, each
    strip allowed only while at least two characters remain. Tokens shorter
    than four characters pass through unchanged; tokens without Arabic letters
    pass through lowercased.
    """
    if not any(is_arabic_char(ch) for ch in token):
        return token.lower()
    if len(token) < 4:
        return token
    out = token
    for prefixes in (_CONJUNCTIONS, _PREPOSITIONS, _ARTICLES):
        for prefix in prefixes:
            if out.startswith(prefix) and len(out) - len(prefix) >= _MIN_STEM_RESIDUAL:
                out = out[len(prefix):]
                break
    for suffix in _SUFFIXES:
        if out.endswith(suffix) and len(out) - len(suffix) >= _MIN_STEM_RESIDUAL:
            out = out[: -len(suffix)]
            break
    return out


def stem_set(tokens: Iterable[str], stemmer: Callable[[str], str] = stem) -> frozenset[str]:
    """Deduplicated stems of a token sequence (set semantics)."""
    return frozenset(stemmer(tok) for tok in tokens)


def jaccard_index(q: frozenset[str] | set[str], t: frozenset[str] | set[str]) -> float:
    """|Q ∩ T| / |Q ∪ T|; two empty sets score 0 by convention."""
    union = len(q | t)
    if union == 0:
        return 0.0
    return len(q & t) / union


def cosine_similarity(q: np.ndarray, t: np.ndarray) -> float:
    """Cosine of two embedding vectors, clamped to [-1, 1].

    A zero vector on either side scores 0 and bumps the zero-vector counter;
    mismatched dimensions are a contract error.
    """
    if q.shape != t.shape:
        raise ValueError(f"embedding dim mismatch: {q.shape} vs {t.shape}")
    qn = float(np.linalg.norm(q))
    tn = float(np.linalg.norm(t))
    if qn == 0.0 or tn == 0.0:
        counters.zero_vectors += 1
        return 0.0
    return float(np.clip(float(np.dot(q, t)) / (qn * tn), -1.0, 1.0))


class EmbeddingProvider(Protocol):
    provider_id: str
    dim: int

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]: ...


class FallbackEmbedder:
    """Hashed character-trigram sentence embedder.

    Each overlapping character trigram is hashed (sha1, platform-stable) to a
    bucket and a sign; the resulting vector is L2-normalized. Texts shorter
    than three characters produce the zero vector, which downstream cosine
    treats as similarity 0.
    """

    def __init__(self, dim: int = 256):
        if dim < 1:
            raise ValueError("dim must be positive")
        self.dim = dim
        self.provider_id = f"fallback-char3-d{dim}"

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        return [self._embed_one(t) for t in texts]

    def _embed_one(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim, dtype=np.float64)
        for i in range(len(text) - 2):
            digest = hashlib.sha1(text[i : i + 3].encode("utf-8")).digest()
            bucket = int.from_bytes(digest[:4], "little") % self.dim
            sign = 1.0 if digest[4] & 1 else -1.0
            vec[bucket] += sign
        norm = np.linalg.norm(vec)
        if norm == 0.0:
            counters.zero_vectors += 1
            return vec
        return vec / norm


class RemoteEmbedder:
    """Client for the HTTP embedding sidecar.

    POST {base}/embed with {"texts": [...]} must return {"dim": d,
    "vectors": [[...], ...]} in request order. Transient failures are retried;
    a batch that still fails raises ProviderError.
    """

    def __init__(self, base_url: str, timeout_ms: int = 5000, retries: int = 2):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout_ms / 1000.0
        self.retries = retries
        self.provider_id = f"remote:{self.base_url}"
        self.dim = -1  # learned from the first response or health check

    def health(self) -> dict:
        resp = requests.get(f"{self.base_url}/health", timeout=self.timeout)
        resp.raise_for_status()
        info = resp.json()
        self.dim = int(info["dim"])
        return info

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        payload = {"texts": list(texts)}
        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                resp = requests.post(f"{self.base_url}/embed", json=payload, timeout=self.timeout)
                resp.raise_for_status()
                body = resp.json()
                break
            except (requests.RequestException, ValueError) as exc:
                last_error = exc
                if attempt < self.retries:
                    time.sleep(min(0.1 * 2**attempt, 1.0))
        else:
            raise ProviderError(f"embed batch failed after {self.retries + 1} attempts: {last_error}")
        dim = int(body["dim"])
        vectors = body["vectors"]
        if len(vectors) != len(texts):
            raise ProviderError(f"provider returned {len(vectors)} vectors for {len(texts)} texts")
        self.dim = dim
        out = []
        for vec in vectors:
            arr = np.asarray(vec, dtype=np.float64)
            if arr.shape != (dim,):
                raise ProviderError(f"provider vector has shape {arr.shape}, expected ({dim},)")
            out.append(arr)
        return out


def make_provider(cfg: SimFilterConfig) -> EmbeddingProvider:
    if cfg.provider == "fallback":
        return FallbackEmbedder(dim=cfg.fallback_dim)
    if cfg.provider == "remote":
        return RemoteEmbedder(cfg.embed_url, cfg.embed_timeout_ms, cfg.embed_retries)
    raise ValueError(f"unknown embedding provider: {cfg.provider!r}")


class EmbeddingCache:
    """Vectors keyed by (provider_id, text); values are deterministic per key,
    so concurrent last-write-wins insertion is benign."""

    def __init__(self) -> None:
        self._store: dict[tuple[str, str], np.ndarray] = {}

    def __len__(self) -> int:
        return len(self._store)

    def get_many(
        self, provider: EmbeddingProvider, texts: Sequence[str], batch_size: int = 128
    ) -> list[np.ndarray]:
        missing: list[str] = []
        seen = set()
        for text in texts:
            key = (provider.provider_id, text)
            if key not in self._store and text not in seen:
                seen.add(text)
                missing.append(text)
        for start in range(0, len(missing), batch_size):
            chunk = missing[start : start + batch_size]
            for text, vec in zip(chunk, provider.embed(chunk)):
                self._store[(provider.provider_id, text)] = vec
        return [self._store[(provider.provider_id, text)] for text in texts]


def run_simfilter(
    pairs: Sequence[CleanPair],
    cfg: SimFilterConfig | None = None,
    provider: EmbeddingProvider | None = None,
    stemmer: Callable[[str], str] = stem,
    cache: EmbeddingCache | None = None,
) -> tuple[list[CleanPair], FilterReport]:
    """Gate prefiltered pairs by identity, Jaccard, then cosine.

    Each drop is attributed to the first failing gate; thresholds are
    inclusive for keeping (J >= min_jaccard, min_cosine <= cos <= max_cosine).
    """
    if cfg is None:
        cfg = SimFilterConfig()
    if provider is None:
        provider = make_provider(cfg)
    if cache is None:
        cache = EmbeddingCache()
    report = FilterReport.empty(SIM_FILTER_NAMES)
    report.input_count = len(pairs)

    survivors: list[CleanPair] = []
    for pair in pairs:
        if pair.query_text == pair.title_text:
            report.record_drop("identical")
            continue
        j = jaccard_index(stem_set(pair.query_tokens, stemmer), stem_set(pair.title_tokens, stemmer))
        if j < cfg.min_jaccard:
            report.record_drop("jaccard")
            continue
        survivors.append(pair)

    texts: list[str] = []
    for pair in survivors:
        texts.append(pair.query_text)
        texts.append(pair.title_text)
    vectors = cache.get_many(provider, texts) if texts else []

    kept: list[CleanPair] = []
    for idx, pair in enumerate(survivors):
        cos = cosine_similarity(vectors[2 * idx], vectors[2 * idx + 1])
        if cos < cfg.min_cosine:
            report.record_drop("cosine_low")
        elif cos > cfg.max_cosine:
            report.record_drop("cosine_high")
        else:
            kept.append(pair)
    report.output_count = len(kept)
    return kept, report
