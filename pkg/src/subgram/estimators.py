"""Scikit-learn style estimators over the model builders.

Each estimator takes hyperparameters in its constructor, learns from an
iterable of tokenized sentences in ``fit``, and exposes the fitted artifacts
through trailing-underscore attributes (``vocab_``, ``model_`` ...). They
compose with the usual ecosystem tooling: ``get_params``/``set_params``
drive the CLI sweeps via ``sklearn.base.clone``, and ``score`` returns the
mean log10 likelihood per token so model selection treats higher as better.

Sentences are sequences of already-segmented subword strings; segmentation
itself lives in :mod:`subgram.segmentation`.
"""

from __future__ import annotations

import math
from collections.abc import Sequence

import numpy as np
from sklearn.base import BaseEstimator, clone
from sklearn.utils.validation import check_is_fitted

from . import rnn as _rnn
from .approx import NORMALIZER_FULL, pc_scores
from .backoff import BackoffModel, perplexity as _model_perplexity, write_arpa
from .builder import GrowConfig, build_backoff_pc, grow_approx, grow_kn
from .counts import count_ngrams
from .stream import emit_scorer_stream
from .vocab import Vocabulary, vocab_from_sentences

Sentences = Sequence[Sequence[str]]


def check_sentences(X: Sentences) -> list[list[str]]:
    """Validate and materialize a corpus of tokenized sentences."""
    if isinstance(X, str):
        raise TypeError("expected a sequence of token sequences, got a single string")
    out = []
    for i, sent in enumerate(X):
        if isinstance(sent, str):
            raise TypeError(f"sentence {i} is a bare string; tokenize it first")
        toks = list(sent)
        if not all(isinstance(t, str) and t for t in toks):
            raise ValueError(f"sentence {i} contains empty or non-string tokens")
        out.append(toks)
    if not out:
        raise ValueError("corpus is empty")
    return out


class _BackoffMixin:
    """Shared query surface for estimators whose artifact is a BackoffModel."""

    model_: BackoffModel
    vocab_: Vocabulary

    def log_prob(self, history: Sequence[str], word: str) -> float:
        check_is_fitted(self, "model_")
        return self.model_.query_tokens(history, word)

    def perplexity(self, X: Sentences) -> float:
        check_is_fitted(self, "model_")
        return _model_perplexity(self.model_, check_sentences(X))

    def score(self, X: Sentences, y=None) -> float:
        """Mean log10 probability per predicted token (higher is better)."""
        return -math.log10(self.perplexity(X))

    def to_arpa(self, path: str) -> None:
        check_is_fitted(self, "model_")
        with open(path, "w", encoding="utf-8") as f:
            write_arpa(self.model_, f)


def _fitted_scorer(scorer, sentences) -> "RnnLanguageModel":
    """A fitted scorer for the approximators; user-supplied unfitted scorers
    are cloned first so constructor arguments stay untouched."""
    if scorer is None:
        scorer = RnnLanguageModel()
    if hasattr(scorer, "params_"):
        return scorer
    scorer = clone(scorer)
    scorer.fit(sentences)
    return scorer


class RnnLanguageModel(BaseEstimator):
    """Recurrent next-subword model; the scorer behind the approximators."""

    def __init__(self, embed_dim: int = 16, hidden_dim: int = 32, epochs: int = 10,
                 learning_rate: float = 0.1, lr_decay: float = 0.0,
                 clip_norm: float = 5.0, seed: int = 0,
                 validation_fraction: float = 0.0):
        self.embed_dim = embed_dim
        self.hidden_dim = hidden_dim
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.lr_decay = lr_decay
        self.clip_norm = clip_norm
        self.seed = seed
        self.validation_fraction = validation_fraction

    def fit(self, X: Sentences, y=None) -> "RnnLanguageModel":
        sentences = check_sentences(X)
        self.vocab_ = vocab_from_sentences(sentences)
        ids = [self.vocab_.encode(s) for s in sentences]
        validation = None
        if self.validation_fraction > 0:
            split = max(1, int(len(ids) * (1.0 - self.validation_fraction)))
            ids, validation = ids[:split], ids[split:]
        config = _rnn.RnnConfig(
            embed_dim=self.embed_dim, hidden_dim=self.hidden_dim,
            epochs=self.epochs, learning_rate=self.learning_rate,
            lr_decay=self.lr_decay, clip_norm=self.clip_norm,
            seed=self.seed, validation=validation)
        self.params_ = _rnn.train_rnn(ids, self.vocab_, config)
        return self

    def emit_records(self, X: Sentences, k: int, full_vectors: bool = False):
        """Scorer records over a corpus, encoded with the fitted vocabulary."""
        check_is_fitted(self, "params_")
        ids = [self.vocab_.encode(s) for s in check_sentences(X)]
        return emit_scorer_stream(self.params_, ids, k, full_vectors)

    def perplexity(self, X: Sentences) -> float:
        check_is_fitted(self, "params_")
        total = 0.0
        count = 0
        for sent in check_sentences(X):
            ids = self.vocab_.encode(sent)
            targets, dists = _rnn.sentence_distributions(self.params_, ids)
            total += float(np.log10(dists[np.arange(len(targets)), targets]).sum())
            count += len(targets)
        return 10.0 ** (-total / count)

    def score(self, X: Sentences, y=None) -> float:
        return -math.log10(self.perplexity(X))


class KneserNeyLanguageModel(_BackoffMixin, BaseEstimator):
    """Variable-order interpolated Kneser-Ney baseline."""

    def __init__(self, max_order: int = 3, epsilon: float = 0.0,
                 discount: float | None = None):
        self.max_order = max_order
        self.epsilon = epsilon
        self.discount = discount

    def fit(self, X: Sentences, y=None) -> "KneserNeyLanguageModel":
        sentences = check_sentences(X)
        self.vocab_ = vocab_from_sentences(sentences)
        ids = [self.vocab_.encode(s) for s in sentences]
        self.counts_ = count_ngrams(ids, self.vocab_, self.max_order).seal()
        config = GrowConfig(n_max=self.max_order, epsilon=self.epsilon,
                            discount=self.discount)
        self.model_ = grow_kn(self.counts_, config)
        return self


class TopKApproximatedLanguageModel(_BackoffMixin, BaseEstimator):
    """Variable-order n-gram approximation of a neural scorer.

    Accumulates, per corpus position, the observed probability plus the
    `top_k` strongest non-observed continuations, and grows the context set
    order by order under the `epsilon` acceptance threshold.
    """

    def __init__(self, scorer: RnnLanguageModel | None = None, top_k: int = 3,
                 max_order: int = 5, epsilon: float = 0.1, smoothing: float = 0.5):
        self.scorer = scorer
        self.top_k = top_k
        self.max_order = max_order
        self.epsilon = epsilon
        self.smoothing = smoothing

    def fit(self, X: Sentences, y=None) -> "TopKApproximatedLanguageModel":
        sentences = check_sentences(X)
        self.scorer_ = _fitted_scorer(self.scorer, sentences)
        self.vocab_ = self.scorer_.vocab_
        records = list(self.scorer_.emit_records(sentences, self.top_k))
        config = GrowConfig(n_max=self.max_order, epsilon=self.epsilon,
                            smoothing=self.smoothing)
        self.model_ = grow_approx(records, config, self.vocab_, expected_k=self.top_k)
        return self


class ProbabilityConvertedLanguageModel(_BackoffMixin, BaseEstimator):
    """Fixed-order baseline conversion of a neural scorer.

    Averages the scorer's probability of each observed gram over its corpus
    occurrences and renormalizes per history against full output vectors,
    which is the expensive route the top-K method shortcuts.
    """

    def __init__(self, scorer: RnnLanguageModel | None = None, order: int = 5,
                 smoothing: float = 0.5, normalizer: str = NORMALIZER_FULL):
        self.scorer = scorer
        self.order = order
        self.smoothing = smoothing
        self.normalizer = normalizer

    def fit(self, X: Sentences, y=None) -> "ProbabilityConvertedLanguageModel":
        sentences = check_sentences(X)
        self.scorer_ = _fitted_scorer(self.scorer, sentences)
        self.vocab_ = self.scorer_.vocab_
        records = self.scorer_.emit_records(sentences, 0, full_vectors=True)
        table = pc_scores(records, None, self.order, self.vocab_,
                          normalizer=self.normalizer)
        config = GrowConfig(n_max=self.order, smoothing=self.smoothing)
        self.model_ = build_backoff_pc(table, config)
        return self
