"""Score tables: neural probabilities aggregated onto n-gram supports.

Three routes from a scorer stream to per-(history, word) scores:

* ``pc_scores``: the baseline probability-conversion aggregation: for every
  observed gram, the mean model probability over its corpus occurrences,
  plus a per-history normalizer obtained from whole output vectors.
* ``ours_scores``: the restricted sum: each position contributes the
  observed token's probability plus its top-K non-observed probabilities to
  every history suffix, so the table support stays linear in corpus size.
* ``oracle_marginalize``: an exact reference that materializes the set of
  distinct sentence prefixes ending in a history and mixes whole model
  distributions by prefix frequency. Desk-scale only; used to validate the
  positional implementations.
"""

from __future__ import annotations

from collections import Counter
from collections.abc import Iterable, Sequence
from typing import BinaryIO

import numpy as np

from . import _binio
from .counts import CountTrie, Gram, ProbAccumulator, padded
from .errors import DataError
from .rnn import RnnParams, init_state, score_step
from .stream import ScorerRecord, replay_prefixes
from .vocab import Vocabulary

METHOD_PC = "pc"
METHOD_OURS = "ours"

NORMALIZER_FULL = "full-vector"
NORMALIZER_STRICT = "strict"

TABLE_KIND = b"STBL"
_METHOD_TAGS = {METHOD_PC: b"P", METHOD_OURS: b"O"}
_NORM_TAGS = {None: b"-", NORMALIZER_FULL: b"F", NORMALIZER_STRICT: b"S"}


class ScoreTable:
    """Accumulated scores of one method, ready for back-off model building."""

    def __init__(
        self,
        method: str,
        order: int,
        acc: ProbAccumulator,
        normalizer: str | None = None,
        k: int | None = None,
    ):
        if method not in (METHOD_PC, METHOD_OURS):
            raise ValueError(f"unknown score table method {method!r}")
        self.method = method
        self.order = order
        self.acc = acc
        self.normalizer = normalizer
        self.k = k

    @property
    def vocab(self) -> Vocabulary:
        return self.acc.vocab

    def histories(self, order: int | None = None) -> list[Gram]:
        return self.acc.histories(order)

    def continuations(self, history: Sequence[int]) -> dict[int, tuple[float, int]]:
        return self.acc.continuations(history)

    def context_positions(self, history: Sequence[int]) -> int:
        return self.acc.context_positions(history)

    def pc_means(self, history: Sequence[int]) -> dict[int, float]:
        """Occurrence-weighted mean probability per observed continuation."""
        return {w: s / n for w, (s, n) in self.acc.continuations(history).items()}

    def pc_normalizer(self, history: Sequence[int]) -> float:
        """Denominator of the probability-conversion ratio for one history."""
        if self.normalizer == NORMALIZER_FULL:
            pos = self.acc.context_positions(history)
            if pos == 0:
                return 0.0
            return self.acc.context_vector_mass(history) / pos
        return sum(self.pc_means(history).values())

    def ours_normalized(self, history: Sequence[int]) -> dict[int, float]:
        """Accumulated mass divided by the history's position count."""
        c_h = self.acc.context_positions(history)
        if c_h == 0:
            return {}
        return {w: s / c_h for w, (s, _) in self.acc.continuations(history).items()}

    def order_size(self, order: int) -> int:
        return self.acc.order_size(order)

    def save(self, f: BinaryIO) -> None:
        _binio.write_header(f, TABLE_KIND, 1, self.vocab.content_hash())
        f.write(_METHOD_TAGS[self.method])
        _binio.write_uvarint(f, self.order)
        f.write(_NORM_TAGS[self.normalizer])
        _binio.write_uvarint(f, 0 if self.k is None else self.k + 1)
        self.acc.save(f)

    @classmethod
    def load(cls, f: BinaryIO, vocab: Vocabulary) -> "ScoreTable":
        vocab_hash = _binio.read_header(f, TABLE_KIND, 1)
        if vocab_hash != vocab.content_hash():
            raise ValueError("score table was built on a different vocabulary")
        method_tag = f.read(1)
        methods = {v: k for k, v in _METHOD_TAGS.items()}
        if method_tag not in methods:
            raise ValueError("corrupt score table: bad method tag")
        order = _binio.read_uvarint(f)
        norm_tag = f.read(1)
        norms = {v: k for k, v in _NORM_TAGS.items()}
        if norm_tag not in norms:
            raise ValueError("corrupt score table: bad normalizer tag")
        k_raw = _binio.read_uvarint(f)
        acc = ProbAccumulator.load(f, vocab)
        return cls(methods[method_tag], order, acc,
                   normalizer=norms[norm_tag],
                   k=None if k_raw == 0 else k_raw - 1)


def _suffixes(prefix: list[int], max_len: int):
    """History suffixes of a position's prefix, shortest (empty) first."""
    length = len(prefix)
    for j in range(0, max_len + 1):
        if j > length:
            return
        yield tuple(prefix[length - j:])


def pc_scores(
    stream: Iterable[ScorerRecord],
    counts: CountTrie | None,
    n: int,
    vocab: Vocabulary,
    normalizer: str = NORMALIZER_FULL,
) -> ScoreTable:
    """Probability-conversion aggregation over a full-vector scorer stream.

    Every record must carry the whole output distribution; the per-history
    normalizer aggregates those vectors position by position (this is the
    expensive part the restricted method avoids). When `counts` is given the
    accumulated occurrence numbers are cross-checked against it.
    """
    if n < 1:
        raise ValueError("order must be at least 1")
    if normalizer not in (NORMALIZER_FULL, NORMALIZER_STRICT):
        raise ValueError(f"unknown normalizer mode {normalizer!r}")
    if counts is not None and counts.n_max < n:
        raise ValueError(f"counts cover order {counts.n_max}, table needs {n}")
    acc = ProbAccumulator(vocab, n)
    for prefix, rec in replay_prefixes(stream):
        if rec.full is None:
            raise DataError("probability conversion requires a full-vector stream")
        vec_mass = float(rec.full.sum())
        contribution = [(rec.observed, rec.p_obs)]
        for h in _suffixes(prefix, n - 1):
            acc.add_position(h, contribution, vec_mass)
    acc.seal()
    if counts is not None:
        for h, w, _s, hits in acc.entries():
            expect = counts.count((*h, w))
            if hits != expect:
                raise DataError(
                    f"stream/count mismatch for gram {(*h, w)}: {hits} vs {expect}")
    return ScoreTable(METHOD_PC, n, acc, normalizer=normalizer)


def ours_scores(
    stream: Iterable[ScorerRecord],
    n: int,
    vocab: Vocabulary,
    candidate_contexts: set[Gram] | None = None,
    expected_k: int | None = None,
) -> ScoreTable:
    """Top-K restricted sums over every history suffix of every position.

    Per position the observed token's probability and each top-K entry are
    added to all suffix histories of length < n (restricted to
    `candidate_contexts` when given, which is how the growing loop bounds
    memory). Normalization by position counts is deferred to model building.
    """
    if n < 1:
        raise ValueError("order must be at least 1")
    acc = ProbAccumulator(vocab, n)
    seen_k = None
    for prefix, rec in replay_prefixes(stream):
        if seen_k is None:
            seen_k = len(rec.topk)
            if expected_k is not None and seen_k != min(expected_k, len(vocab) - 1):
                raise DataError(
                    f"stream carries {seen_k} top-k entries, configured K is {expected_k}")
        contributions = [(rec.observed, rec.p_obs), *rec.topk]
        for h in _suffixes(prefix, n - 1):
            if candidate_contexts is not None and h not in candidate_contexts:
                continue
            acc.add_position(h, contributions)
    acc.seal()
    k = seen_k if expected_k is None else expected_k
    return ScoreTable(METHOD_OURS, n, acc, k=k)


def oracle_marginalize(
    sentences: Sequence[Sequence[int]],
    params: RnnParams,
    history: Sequence[int],
    vocab: Vocabulary,
) -> np.ndarray:
    """Exact marginal next-token distribution for `history`.

    Materializes every distinct boundary-padded sentence prefix ending in the
    history, weights each by its occurrence count, and mixes the model's
    full distributions. The result is a proper distribution over the
    vocabulary. Unseen histories are rejected.
    """
    h = tuple(history)
    prefix_counts: Counter[Gram] = Counter()
    for sent in sentences:
        pad = padded(sent)
        for t in range(1, len(pad)):
            prefix = tuple(pad[:t])
            if len(prefix) >= len(h) and prefix[len(prefix) - len(h):] == h:
                prefix_counts[prefix] += 1
    if not prefix_counts:
        raise ValueError(f"history {h} does not occur in the corpus")
    c_h = sum(prefix_counts.values())
    dist = np.zeros(len(vocab))
    for prefix, c in sorted(prefix_counts.items()):
        state = init_state(params)
        for tok in prefix:
            state, vec = score_step(params, state, tok)
        dist += (c / c_h) * vec
    return dist
