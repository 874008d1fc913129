"""Trigram language model: counting, Kneser-Ney estimation, scoring, binary io.

The model assigns every sentence the product over positions of
p(w_i | w_{i-2}, w_{i-1}). Smoothing is interpolated Kneser-Ney with a single
fixed discount: the trigram level discounts raw counts, the bigram level
discounts continuation counts, and the unigram level interpolates continuation
mass with a uniform distribution over the vocabulary plus an unknown-word
token, so every conditional distribution sums to one and assigns every word
positive probability.

The binary format stores the final probability tables (bases and interpolation
weights) as flat little-endian arrays, so loading is a linear scan with no
re-estimation and reproduces bit-identical scores.
"""
from __future__ import annotations

import math
import struct
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus_io import TokenSeq
from .errors import FormatError

BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"

_BOS_ID = 0
_EOS_ID = 1
_UNK_ID = 2

_MAGIC = b"QRLM"
_VERSION = 1


@dataclass
class NGramCounts:
    """Raw n-gram counts over sentences padded with two BOS and one EOS."""

    order: int
    unigrams: Counter
    bigrams: Counter
    trigrams: Counter

    @property
    def total_sentences(self) -> int:
        # every padded sentence contributes exactly one (BOS, BOS) bigram
        return self.bigrams.get((BOS, BOS), 0)


def count_ngrams(corpus: Iterable[TokenSeq], order: int = 3) -> NGramCounts:
    """Exact counts of all 1..order-grams over the padded corpus."""
    if order != 3:
        raise ValueError("only trigram counting is supported")
    unigrams: Counter = Counter()
    bigrams: Counter = Counter()
    trigrams: Counter = Counter()
    for tokens in corpus:
        padded = [BOS, BOS, *tokens, EOS]
        unigrams.update(padded)
        bigrams.update(zip(padded, padded[1:]))
        trigrams.update(zip(padded, padded[1:], padded[2:]))
    return NGramCounts(order=3, unigrams=unigrams, bigrams=bigrams, trigrams=trigrams)


class TrigramModel:
    """Immutable smoothed trigram model.

    Internals: ``vocab`` lists tokens by id (BOS, EOS, UNK reserved), ``uni``
    holds unigram probabilities, and the two context tables map a context to
    its interpolation weight plus discounted per-word base mass. Scoring adds
    base mass and the weighted lower-order probability at each level, backing
    off completely for unseen contexts.
    """

    def __init__(
        self,
        vocab: list[str],
        uni: np.ndarray,
        mid: dict[int, tuple[float, dict[int, float]]],
        top: dict[tuple[int, int], tuple[float, dict[int, float]]],
        discount: float,
        unk_mode: str = "map",
    ):
        self.vocab = vocab
        self.uni = uni
        self.mid = mid
        self.top = top
        self.discount = discount
        self.unk_mode = unk_mode
        # Text lookup never resolves to the reserved marker ids.
        self.token_ids = {tok: i for i, tok in enumerate(vocab) if i >= 3}

    @property
    def vocab_size(self) -> int:
        return len(self.vocab)

    def token_id(self, token: str) -> int:
        return self.token_ids.get(token, _UNK_ID)

    def prob_id(self, u: int, v: int, w: int) -> float:
        p = self.uni[w]
        entry = self.mid.get(v)
        if entry is not None:
            lam, bases = entry
            p = bases.get(w, 0.0) + lam * p
        entry = self.top.get((u, v))
        if entry is not None:
            lam, bases = entry
            p = bases.get(w, 0.0) + lam * p
        return p

    def logprob_id(self, u: int, v: int, w: int) -> float:
        return math.log(self.prob_id(u, v, w))

    # -- incremental scoring interface used by the decoder --

    def start_state(self) -> tuple[int, int]:
        return (_BOS_ID, _BOS_ID)

    def score_step(self, state: tuple[int, int], token: str) -> tuple[float, tuple[int, int]]:
        w = self.token_id(token)
        u, v = state
        return self.logprob_id(u, v, w), (v, w)

    def score_end(self, state: tuple[int, int]) -> float:
        u, v = state
        return self.logprob_id(u, v, _EOS_ID)

    # -- diagnostics --

    def context_prob_sum(self, u: int, v: int) -> float:
        """Sum of p(w | u, v) over the full predictable vocabulary (no BOS)."""
        return sum(self.prob_id(u, v, w) for w in range(1, self.vocab_size))

    def dump_lines(self) -> Iterable[str]:
        """Human-readable `logprob<TAB>ngram` lines, sorted per order, for diffing."""
        for w in sorted(range(1, self.vocab_size), key=lambda i: self.vocab[i]):
            yield f"{math.log(self.uni[w]):.9g}\t{self.vocab[w]}"
        for v in sorted(self.mid, key=lambda i: self.vocab[i]):
            lam, bases = self.mid[v]
            for w in sorted(bases, key=lambda i: self.vocab[i]):
                p = bases[w] + lam * self.uni[w]
                yield f"{math.log(p):.9g}\t{self.vocab[v]} {self.vocab[w]}"
        for (u, v) in sorted(self.top, key=lambda c: (self.vocab[c[0]], self.vocab[c[1]])):
            lam, bases = self.top[(u, v)]
            for w in sorted(bases, key=lambda i: self.vocab[i]):
                p = bases[w] + lam * self._mid_prob(v, w)
                yield f"{math.log(p):.9g}\t{self.vocab[u]} {self.vocab[v]} {self.vocab[w]}"

    def _mid_prob(self, v: int, w: int) -> float:
        p = self.uni[w]
        entry = self.mid.get(v)
        if entry is not None:
            lam, bases = entry
            p = bases.get(w, 0.0) + lam * p
        return p


def _remap_rare(counts: NGramCounts, min_count: int) -> NGramCounts:
    """Replace tokens with unigram count below the cutoff by the UNK symbol."""
    rare = {tok for tok, c in counts.unigrams.items() if c < min_count and tok not in (BOS, EOS)}
    if not rare:
        return counts

    def m(tok: str) -> str:
        return UNK if tok in rare else tok

    uni: Counter = Counter()
    for tok, c in counts.unigrams.items():
        uni[m(tok)] += c
    bi: Counter = Counter()
    for (a, b), c in counts.bigrams.items():
        bi[(m(a), m(b))] += c
    tri: Counter = Counter()
    for (a, b, cc), c in counts.trigrams.items():
        tri[(m(a), m(b), m(cc))] += c
    return NGramCounts(order=3, unigrams=uni, bigrams=bi, trigrams=tri)


def estimate_kneser_ney(counts: NGramCounts, discount: float = 0.75, min_count: int = 1) -> TrigramModel:
    """Build the interpolated Kneser-Ney model from raw counts.

    The unigram distribution uses continuation counts (in how many distinct
    contexts a word completes a bigram), giving rare-but-ubiquitous words more
    mass than their raw frequency would.
    """
    if not counts.trigrams:
        raise ValueError("cannot estimate a model from empty counts")
    if not 0.0 < discount < 1.0:
        raise ValueError("discount must be in (0, 1)")
    if min_count > 1:
        counts = _remap_rare(counts, min_count)

    types = sorted(t for t in counts.unigrams if t not in (BOS, EOS, UNK))
    vocab = [BOS, EOS, UNK, *types]
    tid = {tok: i for i, tok in enumerate(vocab)}

    # Unigram level: continuation counts over bigram types (v, w), w != BOS.
    cont1: Counter = Counter()
    for (v, w) in counts.bigrams:
        if w != BOS:
            cont1[tid[w]] += 1
    cont1_total = sum(cont1.values())
    t1 = len(cont1)
    n_predictable = len(vocab) - 2  # everything but BOS, minus UNK itself
    uniform = 1.0 / (n_predictable + 1)
    lam_uni = discount * t1 / cont1_total
    uni = np.zeros(len(vocab), dtype=np.float64)
    for w in range(1, len(vocab)):
        uni[w] = max(cont1.get(w, 0) - discount, 0.0) / cont1_total + lam_uni * uniform

    # Bigram level: continuation counts over trigram types.
    cont2: dict[int, Counter] = {}
    for (u, v, w) in counts.trigrams:
        cont2.setdefault(tid[v], Counter())[tid[w]] += 1
    mid: dict[int, tuple[float, dict[int, float]]] = {}
    for v in sorted(cont2):
        row = cont2[v]
        total = sum(row.values())
        lam = discount * len(row) / total
        bases = {w: max(c - discount, 0.0) / total for w, c in sorted(row.items())}
        mid[v] = (lam, bases)

    # Trigram level: absolute discounting of raw counts.
    by_ctx: dict[tuple[int, int], Counter] = {}
    for (u, v, w), c in counts.trigrams.items():
        by_ctx.setdefault((tid[u], tid[v]), Counter())[tid[w]] += c
    top: dict[tuple[int, int], tuple[float, dict[int, float]]] = {}
    for ctx in sorted(by_ctx):
        row = by_ctx[ctx]
        total = sum(row.values())
        lam = discount * len(row) / total
        bases = {w: max(c - discount, 0.0) / total for w, c in sorted(row.items())}
        top[ctx] = (lam, bases)

    return TrigramModel(vocab=vocab, uni=uni, mid=mid, top=top, discount=discount)


def sentence_logprob(model: TrigramModel, tokens: Sequence[str]) -> float:
    """Natural-log probability of the padded sentence; OOV maps to UNK."""
    state = model.start_state()
    total = 0.0
    for token in tokens:
        lp, state = model.score_step(state, token)
        total += lp
    return total + model.score_end(state)


# -- text persistence (train artifact; compiled to binary for serving) --

_TEXT_HEADER = "querysmt-lm 1"


def save_text(model: TrigramModel, path: str | Path) -> None:
    """Write the full model as plain text, float-exact (repr round-trip)."""
    lines = [
        _TEXT_HEADER,
        f"discount {model.discount!r}",
        f"unk {model.unk_mode}",
        f"vocab {len(model.vocab)}",
    ]
    lines.extend(model.vocab)
    lines.append("uni")
    lines.extend(repr(float(x)) for x in model.uni)
    lines.append(f"mid {len(model.mid)}")
    for v in sorted(model.mid):
        lam, bases = model.mid[v]
        lines.append(f"{v} {lam!r} {len(bases)}")
        lines.extend(f"{w} {bases[w]!r}" for w in sorted(bases))
    lines.append(f"top {len(model.top)}")
    for (u, v) in sorted(model.top):
        lam, bases = model.top[(u, v)]
        lines.append(f"{u} {v} {lam!r} {len(bases)}")
        lines.extend(f"{w} {bases[w]!r}" for w in sorted(bases))
    lines.append("end")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


class _TextReader:
    def __init__(self, path: str | Path):
        self.path = str(path)
        self.lines = Path(path).read_text(encoding="utf-8").splitlines()
        self.pos = 0

    def next(self) -> str:
        if self.pos >= len(self.lines):
            raise FormatError(f"{self.path}: unexpected end of file at line {self.pos + 1}")
        line = self.lines[self.pos]
        self.pos += 1
        return line

    def expect(self, keyword: str) -> list[str]:
        line = self.next()
        parts = line.split(" ")
        if parts[0] != keyword:
            raise FormatError(f"{self.path}:{self.pos}: expected '{keyword}', got {line!r}")
        return parts[1:]


def load_text(path: str | Path) -> TrigramModel:
    """Parse a model written by :func:`save_text`."""
    r = _TextReader(path)
    if r.next() != _TEXT_HEADER:
        raise FormatError(f"{r.path}: not a text model file (bad header)")
    try:
        discount = float(r.expect("discount")[0])
        unk_mode = r.expect("unk")[0]
        n_vocab = int(r.expect("vocab")[0])
        vocab = [r.next() for _ in range(n_vocab)]
        r.expect("uni")
        uni = np.array([float(r.next()) for _ in range(n_vocab)], dtype=np.float64)
        (n_mid,) = r.expect("mid")
        mid: dict[int, tuple[float, dict[int, float]]] = {}
        for _ in range(int(n_mid)):
            v, lam, k = r.next().split(" ")
            bases: dict[int, float] = {}
            for _ in range(int(k)):
                w, base = r.next().split(" ")
                bases[int(w)] = float(base)
            mid[int(v)] = (float(lam), bases)
        (n_top,) = r.expect("top")
        top: dict[tuple[int, int], tuple[float, dict[int, float]]] = {}
        for _ in range(int(n_top)):
            u, v, lam, k = r.next().split(" ")
            bases = {}
            for _ in range(int(k)):
                w, base = r.next().split(" ")
                bases[int(w)] = float(base)
            top[(int(u), int(v))] = (float(lam), bases)
        r.expect("end")
    except (ValueError, IndexError) as exc:
        raise FormatError(f"{r.path}:{r.pos}: malformed model line") from exc
    return TrigramModel(vocab=vocab, uni=uni, mid=mid, top=top, discount=discount, unk_mode=unk_mode)


# -- binary persistence --


def save_binary(model: TrigramModel, path: str | Path) -> None:
    """Write the model in the flat binary layout (see module docstring)."""
    mid_ctx = sorted(model.mid)
    top_ctx = sorted(model.top)
    n_vocab = len(model.vocab)

    mid_offsets, mid_w, mid_base = [], [], []
    mid_lams = []
    for v in mid_ctx:
        lam, bases = model.mid[v]
        mid_lams.append(lam)
        mid_offsets.append(len(mid_w))
        for w in sorted(bases):
            mid_w.append(w)
            mid_base.append(bases[w])

    top_offsets, top_w, top_base = [], [], []
    top_lams, top_keys = [], []
    for (u, v) in top_ctx:
        lam, bases = model.top[(u, v)]
        top_keys.append(u * n_vocab + v)
        top_lams.append(lam)
        top_offsets.append(len(top_w))
        for w in sorted(bases):
            top_w.append(w)
            top_base.append(bases[w])

    header = struct.pack(
        "<4sHBdIIQQQ",
        _MAGIC,
        _VERSION,
        0 if model.unk_mode == "map" else 1,
        model.discount,
        n_vocab,
        len(mid_ctx),
        len(mid_w),
        len(top_ctx),
        len(top_w),
    )
    with open(path, "wb") as fh:
        fh.write(header)
        for tok in model.vocab:
            raw = tok.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
        fh.write(np.asarray(model.uni, dtype="<f8").tobytes())
        fh.write(np.asarray(mid_ctx, dtype="<u4").tobytes())
        fh.write(np.asarray(mid_lams, dtype="<f8").tobytes())
        fh.write(np.asarray(mid_offsets, dtype="<u8").tobytes())
        fh.write(np.asarray(mid_w, dtype="<u4").tobytes())
        fh.write(np.asarray(mid_base, dtype="<f8").tobytes())
        fh.write(np.asarray(top_keys, dtype="<u8").tobytes())
        fh.write(np.asarray(top_lams, dtype="<f8").tobytes())
        fh.write(np.asarray(top_offsets, dtype="<u8").tobytes())
        fh.write(np.asarray(top_w, dtype="<u4").tobytes())
        fh.write(np.asarray(top_base, dtype="<f8").tobytes())


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise FormatError("truncated model file")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def array(self, dtype: str, count: int) -> np.ndarray:
        itemsize = np.dtype(dtype).itemsize
        return np.frombuffer(self.take(itemsize * count), dtype=dtype)


def load_binary(path: str | Path) -> TrigramModel:
    """Load a model written by :func:`save_binary`; no re-estimation happens."""
    reader = _Reader(Path(path).read_bytes())
    header = reader.take(struct.calcsize("<4sHBdIIQQQ"))
    magic, version, unk_byte, discount, n_vocab, n_mid, n_mid_e, n_top, n_top_e = struct.unpack(
        "<4sHBdIIQQQ", header
    )
    if magic != _MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {_MAGIC!r}")
    if version != _VERSION:
        raise FormatError(f"unsupported model version {version}")

    vocab = []
    for _ in range(n_vocab):
        (length,) = struct.unpack("<I", reader.take(4))
        vocab.append(reader.take(length).decode("utf-8"))

    uni = reader.array("<f8", n_vocab).copy()
    mid_ctx = reader.array("<u4", n_mid)
    mid_lams = reader.array("<f8", n_mid)
    mid_offsets = reader.array("<u8", n_mid)
    mid_w = reader.array("<u4", n_mid_e)
    mid_base = reader.array("<f8", n_mid_e)
    top_keys = reader.array("<u8", n_top)
    top_lams = reader.array("<f8", n_top)
    top_offsets = reader.array("<u8", n_top)
    top_w = reader.array("<u4", n_top_e)
    top_base = reader.array("<f8", n_top_e)
    if reader.pos != len(reader.buf):
        raise FormatError("trailing bytes after model payload")

    mid: dict[int, tuple[float, dict[int, float]]] = {}
    for i in range(n_mid):
        start = int(mid_offsets[i])
        end = int(mid_offsets[i + 1]) if i + 1 < n_mid else n_mid_e
        bases = {int(mid_w[j]): float(mid_base[j]) for j in range(start, end)}
        mid[int(mid_ctx[i])] = (float(mid_lams[i]), bases)

    top: dict[tuple[int, int], tuple[float, dict[int, float]]] = {}
    for i in range(n_top):
        start = int(top_offsets[i])
        end = int(top_offsets[i + 1]) if i + 1 < n_top else n_top_e
        bases = {int(top_w[j]): float(top_base[j]) for j in range(start, end)}
        key = int(top_keys[i])
        top[(key // n_vocab, key % n_vocab)] = (float(top_lams[i]), bases)

    return TrigramModel(
        vocab=vocab,
        uni=uni,
        mid=mid,
        top=top,
        discount=discount,
        unk_mode="map" if unk_byte == 0 else "drop",
    )
