"""Scorer streams: per-position neural LM probabilities in corpus order.

A stream carries, for every predicted position (sentence ends included),
the observed token and its probability plus the K most probable
*non-observed* tokens, optionally followed by the entire output
distribution. The file format below is the substitution point for external
neural LMs: anything able to produce these records can drive the
approximation pipeline in place of the built-in recurrent model.

Sentence boundaries are implicit: a record whose observed token is the
sentence-end id closes the current sentence, so consumers can replay the
token prefix without access to the original corpus.
"""

from __future__ import annotations

from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass
from typing import BinaryIO

import numpy as np

from . import _binio
from .rnn import RnnParams, sentence_distributions
from .vocab import BOS_ID, EOS_ID, Vocabulary

STREAM_KIND = b"STRM"


@dataclass
class ScorerRecord:
    sentence: int
    position: int
    observed: int
    p_obs: float
    topk: list[tuple[int, float]]
    full: np.ndarray | None = None


def topk_excluding(vec: np.ndarray, observed: int, k: int) -> list[tuple[int, float]]:
    """Top-k (id, p) pairs excluding `observed`, probability-descending.

    Exact ties are broken by ascending token id so streams are
    deterministic even for degenerate (e.g. uniform) models.
    """
    v = len(vec)
    k = min(k, v - 1)
    if k <= 0:
        return []
    m = min(k + 1, v)
    if m >= v:
        cand = np.arange(v)
    else:
        part = np.argpartition(-vec, m - 1)[:m]
        cand = np.flatnonzero(vec >= vec[part].min())
    order = np.lexsort((cand, -vec[cand]))
    out: list[tuple[int, float]] = []
    for i in order:
        tid = int(cand[i])
        if tid == observed:
            continue
        out.append((tid, float(vec[tid])))
        if len(out) == k:
            break
    return out


def emit_scorer_stream(
    params: RnnParams,
    sentences: Iterable[Sequence[int]],
    k: int,
    full_vectors: bool = False,
) -> Iterator[ScorerRecord]:
    """One record per predicted position, in corpus order."""
    if k < 0:
        raise ValueError("k must be non-negative")
    for s_idx, sent in enumerate(sentences):
        targets, dists = sentence_distributions(params, sent)
        for t, u in enumerate(targets):
            vec = dists[t]
            yield ScorerRecord(
                sentence=s_idx,
                position=t,
                observed=u,
                p_obs=float(vec[u]),
                topk=topk_excluding(vec, u, k),
                full=vec if full_vectors else None,
            )


def stream_topk_len(k: int, vocab_size: int) -> int:
    return min(k, vocab_size - 1)


def write_stream(
    f: BinaryIO,
    records: Iterable[ScorerRecord],
    vocab: Vocabulary,
    k: int,
    full_vectors: bool,
) -> int:
    """Serialize records; returns the number written."""
    _binio.write_header(f, STREAM_KIND, 1, vocab.content_hash())
    _binio.write_uvarint(f, k)
    f.write(b"\x01" if full_vectors else b"\x00")
    vocab_size = len(vocab)
    _binio.write_uvarint(f, vocab_size)
    topk_len = stream_topk_len(k, vocab_size)
    n = 0
    for rec in records:
        if len(rec.topk) != topk_len:
            raise ValueError(
                f"record has {len(rec.topk)} top-k entries, stream expects {topk_len}")
        _binio.write_uvarint(f, rec.observed)
        _binio.write_f64(f, rec.p_obs)
        for tid, p in rec.topk:
            _binio.write_uvarint(f, tid)
            _binio.write_f64(f, p)
        if full_vectors:
            if rec.full is None:
                raise ValueError("stream declared full vectors but record has none")
            f.write(np.ascontiguousarray(rec.full, dtype="<f8").tobytes())
        n += 1
    return n


class StreamReader:
    """Iterates ScorerRecords back out of a serialized stream."""

    def __init__(self, f: BinaryIO, vocab: Vocabulary):
        vocab_hash = _binio.read_header(f, STREAM_KIND, 1)
        if vocab_hash != vocab.content_hash():
            raise ValueError("stream was emitted under a different vocabulary")
        self._f = f
        self.k = _binio.read_uvarint(f)
        flag = f.read(1)
        if flag not in (b"\x00", b"\x01"):
            raise ValueError("corrupt stream header")
        self.full_vectors = flag == b"\x01"
        self.vocab_size = _binio.read_uvarint(f)
        if self.vocab_size != len(vocab):
            raise ValueError("stream vocabulary size mismatch")
        self.topk_len = stream_topk_len(self.k, self.vocab_size)

    def __iter__(self) -> Iterator[ScorerRecord]:
        f = self._f
        sentence = 0
        position = 0
        while True:
            try:
                u = _binio.read_uvarint(f)
            except EOFError:
                return
            p_obs = _binio.read_f64(f)
            topk = []
            for _ in range(self.topk_len):
                tid = _binio.read_uvarint(f)
                p = _binio.read_f64(f)
                topk.append((tid, p))
            full = None
            if self.full_vectors:
                data = f.read(8 * self.vocab_size)
                if len(data) != 8 * self.vocab_size:
                    raise EOFError("truncated full-vector block")
                full = np.frombuffer(data, dtype="<f8")
            yield ScorerRecord(sentence, position, u, p_obs, topk, full)
            if u == EOS_ID:
                sentence += 1
                position = 0
            else:
                position += 1


def replay_prefixes(records: Iterable[ScorerRecord]) -> Iterator[tuple[list[int], ScorerRecord]]:
    """Yield (context prefix including <s>, record) pairs, resetting at </s>.

    The prefix list is reused between iterations; take the suffix tuples you
    need before advancing.
    """
    prefix = [BOS_ID]
    for rec in records:
        yield prefix, rec
        if rec.observed == EOS_ID:
            prefix = [BOS_ID]
        else:
            prefix.append(rec.observed)
