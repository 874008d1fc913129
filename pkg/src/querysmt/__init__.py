"""querysmt: learn to rewrite search queries from query-title click pairs.

A monolingual phrase-based statistical translation pipeline: corpus cleaning,
IBM Model 1 alignment, phrase table extraction and pruning, a Kneser-Ney
trigram language model, a beam-search decoder, MERT weight tuning, and the
identity-skip rewrite rule on top.
"""
from .align import AlignmentMatrix, TranslationTable, symmetrize, train_model1, viterbi_align
from .config import ConfigError, PipelineConfig, load_config
from .corpus_io import (
    NormConfig,
    QueryTitleRecord,
    join_tokens,
    load_raw_pairs,
    normalize_text,
    read_parallel,
    tokenize,
    write_parallel,
)
from .decoder import (
    DecodeParams,
    FeatureWeights,
    ModelBundle,
    NBestEntry,
    decode,
    score_hypothesis,
)
from .errors import FormatError, PipelineError
from .lm import (
    TrigramModel,
    count_ngrams,
    estimate_kneser_ney,
    load_binary,
    save_binary,
    sentence_logprob,
)
from .mert import MertResult, corpus_bleu, line_search_envelope, mert_tune
from .phrasetable import (
    PhraseEntry,
    PhrasePair,
    PhraseTable,
    extract_phrases,
    load_table,
    prune,
    save_table,
    score_phrase_table,
)
from .prefilter import CleanPair, FilterReport, PrefilterConfig, run_prefilter
from .rewriter import (
    ErrorType,
    EvalReport,
    RewriteResult,
    evaluate_batch,
    load_bundle,
    rewrite,
    train_all,
)
from .simfilter import (
    FallbackEmbedder,
    RemoteEmbedder,
    SimFilterConfig,
    jaccard_index,
    run_simfilter,
    stem,
)

__version__ = "0.1.0"

__all__ = [
    "AlignmentMatrix",
    "CleanPair",
    "ConfigError",
    "DecodeParams",
    "ErrorType",
    "EvalReport",
    "FallbackEmbedder",
    "FeatureWeights",
    "FilterReport",
    "FormatError",
    "MertResult",
    "ModelBundle",
    "NBestEntry",
    "NormConfig",
    "PhraseEntry",
    "PhrasePair",
    "PhraseTable",
    "PipelineConfig",
    "PipelineError",
    "PrefilterConfig",
    "QueryTitleRecord",
    "RemoteEmbedder",
    "RewriteResult",
    "SimFilterConfig",
    "TranslationTable",
    "TrigramModel",
    "corpus_bleu",
    "count_ngrams",
    "decode",
    "estimate_kneser_ney",
    "evaluate_batch",
    "extract_phrases",
    "jaccard_index",
    "join_tokens",
    "line_search_envelope",
    "load_binary",
    "load_bundle",
    "load_config",
    "load_raw_pairs",
    "load_table",
    "mert_tune",
    "normalize_text",
    "prune",
    "read_parallel",
    "rewrite",
    "run_prefilter",
    "run_simfilter",
    "save_binary",
    "save_table",
    "score_hypothesis",
    "score_phrase_table",
    "sentence_logprob",
    "stem",
    "symmetrize",
    "tokenize",
    "train_all",
    "train_model1",
    "viterbi_align",
    "write_parallel",
]
