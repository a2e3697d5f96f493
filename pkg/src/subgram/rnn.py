"""A small recurrent next-subword model, trained from scratch with numpy.

Single-layer tanh recurrence with a full softmax output, optimized by plain
SGD with full backpropagation through each sentence (state never crosses
sentence boundaries). Everything is float64 and fully deterministic for a
given seed, so trained checkpoints and the scorer streams derived from them
are reproducible byte for byte.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import BinaryIO

import numpy as np

from . import _binio
from .errors import NumericalError
from .vocab import BOS_ID, EOS_ID, Vocabulary


@dataclass
class RnnParams:
    """Model weights plus the seed they were initialized from."""

    emb: np.ndarray     # (|V|, d_emb)
    w_rec: np.ndarray   # (d_hid, d_emb + d_hid)
    b_rec: np.ndarray   # (d_hid,)
    w_out: np.ndarray   # (|V|, d_hid)
    b_out: np.ndarray   # (|V|,)
    seed: int

    @property
    def vocab_size(self) -> int:
        return self.emb.shape[0]

    @property
    def embed_dim(self) -> int:
        return self.emb.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.w_rec.shape[0]

    def copy(self) -> "RnnParams":
        return RnnParams(self.emb.copy(), self.w_rec.copy(), self.b_rec.copy(),
                         self.w_out.copy(), self.b_out.copy(), self.seed)

    def arrays(self) -> list[np.ndarray]:
        return [self.emb, self.w_rec, self.b_rec, self.w_out, self.b_out]


@dataclass
class RnnConfig:
    embed_dim: int = 16
    hidden_dim: int = 32
    epochs: int = 10
    learning_rate: float = 0.1
    lr_decay: float = 0.0
    clip_norm: float = 5.0
    seed: int = 0
    validation: list | None = field(default=None, repr=False)


def init_params(vocab_size: int, config: RnnConfig) -> RnnParams:
    rng = np.random.default_rng(config.seed)
    scale = 0.1
    emb = rng.uniform(-scale, scale, (vocab_size, config.embed_dim))
    w_rec = rng.uniform(-scale, scale, (config.hidden_dim, config.embed_dim + config.hidden_dim))
    b_rec = np.zeros(config.hidden_dim)
    w_out = rng.uniform(-scale, scale, (vocab_size, config.hidden_dim))
    b_out = np.zeros(vocab_size)
    return RnnParams(emb, w_rec, b_rec, w_out, b_out, config.seed)


def init_state(params: RnnParams) -> np.ndarray:
    """Hidden state at a sentence start (all zeros)."""
    return np.zeros(params.hidden_dim)


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def score_step(params: RnnParams, state: np.ndarray, token: int) -> tuple[np.ndarray, np.ndarray]:
    """Advance one step on `token`; return (new state, next-token distribution)."""
    if not 0 <= token < params.vocab_size:
        raise ValueError(f"token id {token} outside the vocabulary")
    x = np.concatenate([params.emb[token], state])
    new_state = np.tanh(params.w_rec @ x + params.b_rec)
    dist = _softmax(params.w_out @ new_state + params.b_out)
    return new_state, dist


def sentence_states(params: RnnParams, sentence: Sequence[int]) -> np.ndarray:
    """Hidden states over inputs [<s>, w1..wL]; row t predicts position t."""
    inputs = [BOS_ID, *sentence]
    if any(not 0 <= t < params.vocab_size for t in inputs):
        raise ValueError("sentence contains token ids outside the vocabulary")
    d_emb = params.embed_dim
    w_x = params.w_rec[:, :d_emb]
    w_h = params.w_rec[:, d_emb:]
    h = np.zeros(params.hidden_dim)
    states = np.empty((len(inputs), params.hidden_dim))
    for t, tok in enumerate(inputs):
        h = np.tanh(w_x @ params.emb[tok] + w_h @ h + params.b_rec)
        states[t] = h
    return states


def sentence_distributions(params: RnnParams, sentence: Sequence[int]) -> tuple[list[int], np.ndarray]:
    """Targets [w1..wL, </s>] and the predicted distribution at each position.

    The output projection and softmax run batched over the whole sentence,
    which is where nearly all of the arithmetic lives.
    """
    states = sentence_states(params, sentence)
    dists = _softmax(states @ params.w_out.T + params.b_out)
    targets = [*sentence, EOS_ID]
    return targets, dists


def _sentence_loss_and_grads(params: RnnParams, sentence: Sequence[int], want_grads: bool):
    inputs = [BOS_ID, *sentence]
    targets = [*sentence, EOS_ID]
    n = len(inputs)
    d_emb = params.embed_dim
    w_x = params.w_rec[:, :d_emb]
    w_h = params.w_rec[:, d_emb:]

    hs = np.empty((n + 1, params.hidden_dim))
    hs[0] = 0.0
    for t in range(n):
        hs[t + 1] = np.tanh(w_x @ params.emb[inputs[t]] + w_h @ hs[t] + params.b_rec)
    probs = _softmax(hs[1:] @ params.w_out.T + params.b_out)
    idx = np.arange(n)
    with np.errstate(divide="ignore"):
        # An underflowed probability yields an infinite loss, which the
        # training loop reports as divergence.
        loss = -np.log(probs[idx, targets]).sum()
    if not want_grads:
        return loss, None

    d_out = probs.copy()
    d_out[idx, targets] -= 1.0
    g_w_out = d_out.T @ hs[1:]
    g_b_out = d_out.sum(axis=0)
    g_emb = np.zeros_like(params.emb)
    g_w_rec = np.zeros_like(params.w_rec)
    g_b_rec = np.zeros_like(params.b_rec)

    dh_next = np.zeros(params.hidden_dim)
    for t in range(n - 1, -1, -1):
        dh = params.w_out.T @ d_out[t] + dh_next
        da = (1.0 - hs[t + 1] ** 2) * dh
        g_w_rec[:, :d_emb] += np.outer(da, params.emb[inputs[t]])
        g_w_rec[:, d_emb:] += np.outer(da, hs[t])
        g_b_rec += da
        g_emb[inputs[t]] += w_x.T @ da
        dh_next = w_h.T @ da
    return loss, [g_emb, g_w_rec, g_b_rec, g_w_out, g_b_out]


def corpus_cross_entropy(params: RnnParams, sentences: Sequence[Sequence[int]]) -> float:
    """Mean negative log-likelihood (nats) per predicted token."""
    total = 0.0
    tokens = 0
    for sent in sentences:
        loss, _ = _sentence_loss_and_grads(params, sent, want_grads=False)
        total += loss
        tokens += len(sent) + 1
    return total / tokens


def train_rnn(sentences: Sequence[Sequence[int]], vocab: Vocabulary, config: RnnConfig) -> RnnParams:
    """Fit the model by sentence-level SGD; returns the best-epoch weights.

    The selection criterion is validation cross-entropy when
    ``config.validation`` is given, training cross-entropy otherwise.
    A non-finite loss aborts with :class:`NumericalError`.
    """
    if not sentences:
        raise ValueError("training corpus is empty")
    if not vocab.sealed:
        raise ValueError("vocabulary must be sealed before training")
    params = init_params(len(vocab), config)
    best = params.copy()
    best_ce = _selection_ce(params, sentences, config)
    for epoch in range(config.epochs):
        lr = config.learning_rate / (1.0 + config.lr_decay * epoch)
        for sent in sentences:
            loss, grads = _sentence_loss_and_grads(params, sent, want_grads=True)
            if not np.isfinite(loss):
                raise NumericalError(f"training diverged at epoch {epoch} (loss={loss})")
            norm = np.sqrt(sum(float((g * g).sum()) for g in grads))
            if config.clip_norm > 0 and norm > config.clip_norm:
                scale = config.clip_norm / norm
                grads = [g * scale for g in grads]
            for arr, g in zip(params.arrays(), grads):
                arr -= lr * g
        ce = _selection_ce(params, sentences, config)
        if not np.isfinite(ce):
            raise NumericalError(f"training diverged after epoch {epoch} (ce={ce})")
        if ce < best_ce:
            best_ce = ce
            best = params.copy()
    return best


def _selection_ce(params, sentences, config) -> float:
    held_out = config.validation
    return corpus_cross_entropy(params, held_out if held_out else sentences)


def gradient_check(params: RnnParams, batch: Sequence[Sequence[int]],
                   epsilon: float = 1e-5, sample: int = 200, seed: int = 0) -> float:
    """Max relative error between analytic and central-difference gradients.

    Intended for small dimensions and short sentences; checks a seeded
    sample of coordinates from every parameter matrix.
    """
    def batch_loss() -> float:
        return sum(_sentence_loss_and_grads(params, s, want_grads=False)[0] for s in batch)

    grads: list[np.ndarray] | None = None
    for sent in batch:
        _, g = _sentence_loss_and_grads(params, sent, want_grads=True)
        if grads is None:
            grads = g
        else:
            grads = [a + b for a, b in zip(grads, g)]
    assert grads is not None

    rng = np.random.default_rng(seed)
    worst = 0.0
    for arr, grad in zip(params.arrays(), grads):
        size = arr.size
        coords = np.arange(size) if size <= sample else rng.choice(size, sample, replace=False)
        flat = arr.reshape(-1)
        gflat = grad.reshape(-1)
        for i in coords:
            orig = flat[i]
            flat[i] = orig + epsilon
            up = batch_loss()
            flat[i] = orig - epsilon
            down = batch_loss()
            flat[i] = orig
            numeric = (up - down) / (2.0 * epsilon)
            analytic = gflat[i]
            denom = max(abs(analytic), abs(numeric), 1e-8)
            worst = max(worst, abs(analytic - numeric) / denom)
    return worst


CHECKPOINT_KIND = b"RNNC"


def save_params(f: BinaryIO, params: RnnParams, vocab: Vocabulary) -> None:
    _binio.write_header(f, CHECKPOINT_KIND, 1, vocab.content_hash())
    for dim in (params.vocab_size, params.embed_dim, params.hidden_dim, params.seed):
        _binio.write_uvarint(f, dim)
    for arr in params.arrays():
        f.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_params(f: BinaryIO, vocab: Vocabulary) -> RnnParams:
    vocab_hash = _binio.read_header(f, CHECKPOINT_KIND, 1)
    if vocab_hash != vocab.content_hash():
        raise ValueError("checkpoint was trained on a different vocabulary")
    v, d_emb, d_hid, seed = (_binio.read_uvarint(f) for _ in range(4))
    if v != len(vocab):
        raise ValueError("checkpoint vocabulary size mismatch")
    shapes = [(v, d_emb), (d_hid, d_emb + d_hid), (d_hid,), (v, d_hid), (v,)]
    arrays = []
    for shape in shapes:
        n = int(np.prod(shape))
        data = f.read(8 * n)
        if len(data) != 8 * n:
            raise EOFError("truncated checkpoint")
        arrays.append(np.frombuffer(data, dtype="<f8").reshape(shape).copy())
    return RnnParams(*arrays, seed=seed)
