"""Small builders shared across test modules."""
from __future__ import annotations

from querysmt import (
    DecodeParams,
    FeatureWeights,
    ModelBundle,
    PhraseEntry,
    PhrasePair,
    PhraseTable,
    count_ngrams,
    estimate_kneser_ney,
)


def build_lm(sentences, discount=0.75, min_count=1):
    """Trigram model from a list of strings or token lists."""
    corpus = [s.split() if isinstance(s, str) else list(s) for s in sentences]
    return estimate_kneser_ney(count_ngrams(corpus), discount=discount, min_count=min_count)


def make_table(rows):
    """Phrase table from (src_tokens, tgt_tokens, count, phi_f, phi_r, lex_f, lex_r) rows."""
    entries = {}
    for src, tgt, count, phi_f, phi_r, lex_f, lex_r in rows:
        entries[PhrasePair(tuple(src), tuple(tgt))] = PhraseEntry(count, phi_f, phi_r, lex_f, lex_r)
    return PhraseTable(entries)


TOY_SENTENCES = [
    "the feline sat down",
    "the feline ran away",
    "the hound sat down",
    "a feline sat here",
    "the feline sat here",
    "a hound ran away",
]

TOY_TABLE_ROWS = [
    (("the",), ("the",), 9, 0.9, 0.9, 0.9, 0.9),
    (("the",), ("a",), 4, 0.1, 0.2, 0.1, 0.2),
    (("a",), ("a",), 6, 0.8, 0.8, 0.8, 0.8),
    (("cat",), ("feline",), 8, 0.8, 0.7, 0.8, 0.7),
    (("cat",), ("cat",), 4, 0.2, 0.9, 0.2, 0.9),
    (("dog",), ("hound",), 7, 0.9, 0.9, 0.9, 0.9),
    (("sat",), ("sat",), 9, 0.9, 0.9, 0.9, 0.9),
    (("ran",), ("ran",), 9, 0.9, 0.9, 0.9, 0.9),
    (("sat", "down"), ("sat", "down"), 5, 0.6, 0.6, 0.6, 0.6),
    (("down",), ("down",), 6, 0.7, 0.7, 0.7, 0.7),
    (("away",), ("away",), 6, 0.7, 0.7, 0.7, 0.7),
    (("here",), ("here",), 6, 0.7, 0.7, 0.7, 0.7),
]


def make_toy_bundle(beam_size=100, distortion_limit=3, nbest_size=5):
    return ModelBundle(
        phrase_table=make_table(TOY_TABLE_ROWS),
        lm=build_lm(TOY_SENTENCES),
        weights=FeatureWeights(),
        params=DecodeParams(beam_size=beam_size, distortion_limit=distortion_limit, nbest_size=nbest_size),
    )
