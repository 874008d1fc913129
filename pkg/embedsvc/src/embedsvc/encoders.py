"""Embedding encoders behind one small interface.

The service treats an encoder as anything with a dim, a model_id, and an
encode method returning one list of floats per input text. Two kinds exist:
a deterministic hashed char-trigram encoder for hermetic tests and offline
smoke runs, and a sentence-transformers wrapper for real deployments.
"""
from __future__ import annotations

import hashlib
import math
import re
import threading
from typing import Protocol, Sequence

DEFAULT_MODEL = "paraphrase-multilingual-MiniLM-L12-v2"

_HASH_ID = re.compile(r"^hash-(\d+)$")


class EncoderLoadError(RuntimeError):
    """The requested model could not be constructed."""


class Encoder(Protocol):
    dim: int
    model_id: str

    def encode(self, texts: Sequence[str]) -> list[list[float]]: ...


class HashEncoder:
    """Hashed character-trigram vectors, L2-normalized.

    Deterministic across runs and platforms (sha256 only), so recorded wire
    fixtures stay valid indefinitely. Texts shorter than three characters
    embed to the zero vector.
    """

    def __init__(self, dim: int = 256):
        if dim < 1:
            raise ValueError("dim must be positive")
        self.dim = dim
        self.model_id = f"hash-{dim}"

    def encode(self, texts: Sequence[str]) -> list[list[float]]:
        return [self._one(t) for t in texts]

    def _one(self, text: str) -> list[float]:
        vec = [0.0] * self.dim
        for i in range(len(text) - 2):
            digest = hashlib.sha256(text[i : i + 3].encode("utf-8")).digest()
            bucket = int.from_bytes(digest[:4], "big") % self.dim
            vec[bucket] += 1.0 if digest[4] & 1 else -1.0
        norm = math.sqrt(sum(x * x for x in vec))
        if norm == 0.0:
            return vec
        return [x / norm for x in vec]


def _sentence_transformer_cls():
    # deferred so the hash encoder path never pays the torch import
    from sentence_transformers import SentenceTransformer

    return SentenceTransformer


class TransformerEncoder:
    """sentence-transformers wrapper; the checkpoint is a deployment choice."""

    def __init__(self, model_id: str):
        try:
            cls = _sentence_transformer_cls()
        except ImportError as exc:
            raise EncoderLoadError(
                "sentence-transformers is not installed; use a hash-<dim> model "
                "or install the transformer extra"
            ) from exc
        try:
            self._model = cls(model_id)
        except Exception as exc:
            raise EncoderLoadError(f"cannot load model {model_id!r}: {exc}") from exc
        self.model_id = model_id
        self.dim = int(self._model.get_sentence_embedding_dimension())
        # encode is not guaranteed thread safe and the server is concurrent
        self._lock = threading.Lock()

    def encode(self, texts: Sequence[str]) -> list[list[float]]:
        with self._lock:
            vectors = self._model.encode(list(texts))
        return [[float(x) for x in row] for row in vectors]


def load_encoder(model_id: str) -> Encoder:
    """hash-<dim> builds the deterministic encoder; anything else is passed
    to sentence-transformers as a checkpoint id or path."""
    match = _HASH_ID.match(model_id)
    if match:
        try:
            return HashEncoder(int(match.group(1)))
        except ValueError as exc:
            raise EncoderLoadError(str(exc)) from exc
    return TransformerEncoder(model_id)
