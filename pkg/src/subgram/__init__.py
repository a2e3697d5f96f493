"""Subword n-gram language modeling toolkit.

Approximates recurrent subword language models into variable-order back-off
n-gram models (both the classic probability-conversion route and the faster
top-K restricted sums), grows and interpolates them alongside a Kneser-Ney
baseline, reads and writes ARPA files, and scores keyword-search detection
lists with the term-weighted value.
"""

from .approx import ScoreTable, oracle_marginalize, ours_scores, pc_scores
from .backoff import (
    BackoffModel,
    InterpolationSpec,
    interpolate,
    perplexity,
    read_arpa,
    validate_normalization,
    write_arpa,
)
from .builder import GrowConfig, build_backoff_ours, build_backoff_pc, grow_approx, grow_kn, prune_to_size
from .counts import CountTrie, ProbAccumulator, count_ngrams, merge_accumulators, merge_counts
from .errors import DataError, NumericalError
from .estimators import (
    KneserNeyLanguageModel,
    ProbabilityConvertedLanguageModel,
    RnnLanguageModel,
    TopKApproximatedLanguageModel,
)
from .kws import DetectionSet, ReferenceSet, TwvResult, align, evaluate, sweep_report, twv_curve
from .rnn import RnnConfig, RnnParams, gradient_check, score_step, train_rnn
from .segmentation import (
    MarkingScheme,
    SegmentationMap,
    extract_oov_keywords,
    length_stats,
    reconstruct,
    segment_sentence,
    segment_word,
)
from .stream import ScorerRecord, StreamReader, emit_scorer_stream, write_stream
from .vocab import Vocabulary, vocab_from_sentences

__version__ = "0.1.0"

__all__ = [
    "BackoffModel", "CountTrie", "DataError", "DetectionSet", "GrowConfig",
    "InterpolationSpec", "KneserNeyLanguageModel", "MarkingScheme",
    "NumericalError", "ProbAccumulator", "ProbabilityConvertedLanguageModel",
    "ReferenceSet", "RnnConfig", "RnnLanguageModel", "RnnParams",
    "ScoreTable", "ScorerRecord", "SegmentationMap", "StreamReader",
    "TopKApproximatedLanguageModel", "TwvResult", "Vocabulary", "align",
    "build_backoff_ours", "build_backoff_pc", "count_ngrams", "emit_scorer_stream",
    "evaluate", "extract_oov_keywords", "gradient_check", "grow_approx",
    "grow_kn", "interpolate", "length_stats", "merge_accumulators",
    "merge_counts", "oracle_marginalize", "ours_scores", "pc_scores",
    "perplexity", "prune_to_size", "read_arpa", "reconstruct", "score_step",
    "segment_sentence", "segment_word", "sweep_report", "train_rnn",
    "twv_curve", "validate_normalization", "vocab_from_sentences",
    "write_arpa", "write_stream",
]
