"""Queryable back-off n-gram models with ARPA interchange.

Models store log10 probabilities and back-off weights per gram. To make the
text format a faithful serialization, :meth:`BackoffModel.finalize`
quantizes every explicit probability to the 7 decimal places the ARPA
writer emits, recomputes all back-off weights from the quantized values and
quantizes those too; a written file therefore reads back bit-exactly and a
second write is byte-identical to the first.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from typing import BinaryIO, TextIO

from . import _binio
from .errors import DataError
from .vocab import BOS_ID, EOS_ID, Vocabulary

log = logging.getLogger(__name__)

Gram = tuple[int, ...]

LOG_FLOOR = -99.0
_BOW_DENOM_EPS = 1e-12

# Serialized log10 values carry this many decimals; models quantize to the
# same grid at finalization so text round trips are bit-exact.
PRECISION = 7


def _quantize(value: float) -> float:
    return round(max(value, LOG_FLOOR), PRECISION) + 0.0


def floor_log10(p: float) -> float:
    """log10 with the standard -99 floor for vanishing probabilities."""
    if p < 1e-99:
        return LOG_FLOOR
    return max(math.log10(p), LOG_FLOOR)


class BackoffModel:
    """Variable-order back-off model over a fixed vocabulary.

    Immutable once finalized; queries are then safe for any number of
    concurrent readers.
    """

    def __init__(self, vocab: Vocabulary, max_order: int, method: str = "unknown"):
        if max_order < 1:
            raise ValueError("max_order must be at least 1")
        self.vocab = vocab
        self.max_order = max_order
        self.method = method
        self._orders: list[dict[Gram, list]] = [dict() for _ in range(max_order)]
        self._mass: dict[Gram, float] = {}
        self._finalized = False

    # -- construction ------------------------------------------------------

    def add_gram(self, gram: Sequence[int], logp: float, mass: float | None = None) -> None:
        if self._finalized:
            raise RuntimeError("model is finalized")
        gram = tuple(gram)
        if not 1 <= len(gram) <= self.max_order:
            raise ValueError(f"gram length {len(gram)} outside 1..{self.max_order}")
        self._orders[len(gram) - 1][gram] = [logp, None]
        if mass is not None:
            self._mass[gram] = mass

    def remove_gram(self, gram: Sequence[int]) -> None:
        if self._finalized:
            raise RuntimeError("model is finalized")
        gram = tuple(gram)
        del self._orders[len(gram) - 1][gram]
        self._mass.pop(gram, None)

    def unfreeze(self) -> "BackoffModel":
        """Return a mutable deep copy (for pruning and similar surgery)."""
        out = BackoffModel(self.vocab, self.max_order, self.method)
        for k, grams in enumerate(self._orders):
            out._orders[k] = {g: [v[0], v[1]] for g, v in grams.items()}
        out._mass = dict(self._mass)
        return out

    def finalize(self) -> "BackoffModel":
        """Quantize probabilities, derive back-off weights, seal the model."""
        if self._finalized:
            return self
        self._check_prefix_closure()
        for grams in self._orders:
            for cell in grams.values():
                cell[0] = _quantize(cell[0])
        self._recompute_bows()
        self._finalized = True
        return self

    def _check_prefix_closure(self) -> None:
        for k in range(1, self.max_order):
            lower = self._orders[k - 1]
            for gram in self._orders[k]:
                if gram[:-1] not in lower:
                    raise DataError(f"gram {gram} stored without its prefix")

    def _recompute_bows(self) -> None:
        """Back-off weights making every stored context normalize.

        Processed bottom-up so each order's weights are already quantized
        before the next order's are derived from them.
        """
        full_coverage = len(self.vocab) - 1  # every token but <s>
        for k in range(0, self.max_order - 1):
            contexts: dict[Gram, list[int]] = {}
            for gram in self._orders[k + 1]:
                contexts.setdefault(gram[:-1], []).append(gram[-1])
            for gram, cell in self._orders[k].items():
                words = contexts.get(gram)
                if not words:
                    cell[1] = None
                    continue
                if sum(1 for w in words if w != BOS_ID) >= full_coverage:
                    # No back-off path remains from this context.
                    cell[1] = 0.0
                    continue
                sum_hi = 0.0
                sum_lo = 0.0
                for w in words:
                    sum_hi += 10.0 ** self._orders[k + 1][(*gram, w)][0]
                    sum_lo += 10.0 ** self.query(gram[1:], w)
                denom = 1.0 - sum_lo
                numer = 1.0 - sum_hi
                if denom < _BOW_DENOM_EPS:
                    log.warning("context %s covers the vocabulary; back-off weight set to 1", gram)
                    bow = 1.0
                else:
                    if numer < 0.0:
                        if numer < -1e-4:
                            log.warning("context %s over-normalized by %.3e", gram, -numer)
                        numer = 0.0
                    bow = numer / denom
                cell[1] = _quantize(floor_log10(bow))

    # -- queries -----------------------------------------------------------

    def lookup(self, gram: Sequence[int]) -> tuple[float, float | None] | None:
        """(log10 prob, log10 bow or None) of an explicitly stored gram."""
        gram = tuple(gram)
        if not 1 <= len(gram) <= self.max_order:
            return None
        cell = self._orders[len(gram) - 1].get(gram)
        return (cell[0], cell[1]) if cell else None

    def query(self, history: Sequence[int], word: int) -> float:
        """log10 p(word | history) with standard back-off semantics."""
        h = tuple(history)
        if len(h) > self.max_order - 1:
            h = h[len(h) - (self.max_order - 1):]
        acc = 0.0
        while True:
            cell = self._orders[len(h)].get((*h, word))
            if cell is not None:
                return acc + cell[0]
            if not h:
                raise KeyError(f"token id {word} has no unigram entry")
            ctx = self._orders[len(h) - 1].get(h)
            if ctx is not None and ctx[1] is not None:
                acc += ctx[1]
            h = h[1:]

    def query_tokens(self, history: Sequence[str], word: str) -> float:
        """String-level query; unknown tokens map to <unk> at this boundary."""
        ids = [self.vocab.id_or_unk(t) for t in history]
        return self.query(ids, self.vocab.id_or_unk(word))

    def prob(self, history: Sequence[int], word: int) -> float:
        return 10.0 ** self.query(history, word)

    # -- introspection ------------------------------------------------------

    def grams(self, order: int) -> Iterable[Gram]:
        return self._orders[order - 1].keys()

    def order_size(self, order: int) -> int:
        return len(self._orders[order - 1])

    def top_order(self) -> int:
        """Highest order with stored grams."""
        for k in range(self.max_order, 0, -1):
            if self._orders[k - 1]:
                return k
        return 0

    def mass(self, gram: Sequence[int]) -> float:
        """Ranking mass for pruning: accumulated score/count if recorded,
        the explicit probability otherwise."""
        gram = tuple(gram)
        if not 1 <= len(gram) <= self.max_order:
            return 0.0
        stored = self._mass.get(gram)
        if stored is not None:
            return stored
        cell = self._orders[len(gram) - 1].get(gram)
        return 10.0 ** cell[0] if cell else 0.0

    def contexts(self) -> list[Gram]:
        """The empty context plus every gram with stored descendants."""
        out: list[Gram] = [()]
        for k in range(1, self.max_order):
            seen = {g[:-1] for g in self._orders[k]}
            out.extend(sorted(seen))
        return out

    def stats(self) -> dict[str, int]:
        return {f"ngram {k}": self.order_size(k) for k in range(1, self.top_order() + 1)}

    # -- binary snapshot -----------------------------------------------------

    _METHOD_TAGS = ["unknown", "kn", "ours", "pc", "interp", "a", "b"]

    def save(self, f: BinaryIO) -> None:
        """Versioned binary snapshot; exact down to the last bit."""
        _binio.write_header(f, b"BOFF", 1, self.vocab.content_hash())
        tokens = "\n".join(self.vocab.tokens).encode("utf-8")
        _binio.write_uvarint(f, len(tokens))
        f.write(tokens)
        method = self.method if self.method in self._METHOD_TAGS else "unknown"
        _binio.write_uvarint(f, self._METHOD_TAGS.index(method))
        _binio.write_uvarint(f, self.max_order)
        for k in range(1, self.max_order + 1):
            grams = self._orders[k - 1]
            _binio.write_uvarint(f, len(grams))
            for gram in sorted(grams):
                logp, bow = grams[gram]
                for tid in gram:
                    _binio.write_uvarint(f, tid)
                _binio.write_f64(f, logp)
                f.write(b"\x01" if bow is not None else b"\x00")
                if bow is not None:
                    _binio.write_f64(f, bow)
                mass = self._mass.get(gram)
                f.write(b"\x01" if mass is not None else b"\x00")
                if mass is not None:
                    _binio.write_f64(f, mass)

    @classmethod
    def load(cls, f: BinaryIO) -> "BackoffModel":
        vocab_hash = _binio.read_header(f, b"BOFF", 1)
        token_bytes = f.read(_binio.read_uvarint(f))
        tokens = token_bytes.decode("utf-8").split("\n")
        vocab = Vocabulary(tokens[3:]).seal()
        if vocab.content_hash() != vocab_hash:
            raise DataError("model snapshot vocabulary hash mismatch")
        method = cls._METHOD_TAGS[_binio.read_uvarint(f)]
        max_order = _binio.read_uvarint(f)
        model = cls(vocab, max_order, method=method)
        for k in range(1, max_order + 1):
            grams = model._orders[k - 1]
            for _ in range(_binio.read_uvarint(f)):
                gram = tuple(_binio.read_uvarint(f) for _ in range(k))
                logp = _binio.read_f64(f)
                bow = _binio.read_f64(f) if f.read(1) == b"\x01" else None
                if f.read(1) == b"\x01":
                    model._mass[gram] = _binio.read_f64(f)
                grams[gram] = [logp, bow]
        model._finalized = True
        return model


@dataclass(frozen=True)
class NormalizationReport:
    max_deviation: float
    worst_context: Gram
    contexts_checked: int

    @property
    def ok(self) -> bool:
        return self.max_deviation < 1e-4


def validate_normalization(model: BackoffModel, pair_guard: int = 10**6) -> NormalizationReport:
    """Exhaustively check that every stored context sums to one.

    For each context (the root included) the full predictable vocabulary is
    enumerated through the back-off recursion. Refuses inputs where
    contexts x vocabulary exceeds `pair_guard`.
    """
    contexts = model.contexts()
    words = model.vocab.predictable_ids()
    if len(contexts) * len(words) > pair_guard:
        raise ValueError(
            f"{len(contexts)} contexts x {len(words)} tokens exceeds the "
            f"enumeration guard of {pair_guard}")
    worst = -1.0
    worst_ctx: Gram = ()
    for h in contexts:
        total = 0.0
        for w in words:
            total += 10.0 ** model.query(h, w)
        dev = abs(total - 1.0)
        if dev > worst:
            worst = dev
            worst_ctx = h
    return NormalizationReport(worst, worst_ctx, len(contexts))


def perplexity(model: BackoffModel, sentences: Sequence[Sequence[str]]) -> float:
    """10 ** (mean negative log10 probability per predicted token).

    Sentence-end predictions are included; tokens outside the vocabulary are
    mapped to <unk>. Comparable across models only when each is a proper
    distribution.
    """
    total = 0.0
    count = 0
    for sent in sentences:
        ids = [model.vocab.id_or_unk(t) for t in sent]
        history = [BOS_ID]
        for w in [*ids, EOS_ID]:
            total += model.query(history, w)
            history.append(w)
            count += 1
    if count == 0:
        raise ValueError("perplexity of an empty corpus is undefined")
    return 10.0 ** (-total / count)


@dataclass(frozen=True)
class InterpolationSpec:
    """Static mixing weight: `lam` on model A, (1 - lam) on model B."""

    lam: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("interpolation weight must be within [0, 1]")


def interpolate(a: BackoffModel, b: BackoffModel, spec: InterpolationSpec) -> BackoffModel:
    """Materialized linear interpolation of two models.

    The result stores the union of both gram sets; each explicit probability
    is the weighted mean of the components' full back-off evaluations, and
    back-off weights are recomputed so every context normalizes again.

    Degenerate weights (0 or 1) copy the surviving model's back-off weights
    instead: the extra grams enter at exactly their backed-off values, which
    keeps every context sum unchanged while avoiding the amplification of
    quantization error that a recomputation through small denominators would
    introduce. The result is query-identical to the surviving model.
    """
    if a.vocab.content_hash() != b.vocab.content_hash():
        raise ValueError("cannot interpolate models over different vocabularies")
    lam = spec.lam
    out = BackoffModel(a.vocab, max(a.max_order, b.max_order), method="interp")
    for k in range(1, out.max_order + 1):
        grams = set()
        if k <= a.max_order:
            grams.update(a.grams(k))
        if k <= b.max_order:
            grams.update(b.grams(k))
        for g in grams:
            h, w = g[:-1], g[-1]
            p = lam * (10.0 ** a.query(h, w)) + (1.0 - lam) * (10.0 ** b.query(h, w))
            out.add_gram(g, floor_log10(p), mass=lam * a.mass(g) + (1.0 - lam) * b.mass(g))
    if lam not in (0.0, 1.0):
        return out.finalize()

    keep = a if lam == 1.0 else b
    out._check_prefix_closure()
    for grams in out._orders:
        for cell in grams.values():
            cell[0] = _quantize(cell[0])
    for k in range(out.max_order - 1):
        contexts = {g[:-1] for g in out._orders[k + 1]}
        for gram, cell in out._orders[k].items():
            if gram not in contexts:
                cell[1] = None
                continue
            kept = keep.lookup(gram)
            cell[1] = kept[1] if kept is not None and kept[1] is not None else 0.0
    out._finalized = True
    return out


# -- ARPA text format -------------------------------------------------------


def write_arpa(model: BackoffModel, f: TextIO) -> None:
    """Canonical ARPA serialization.

    Fixed 7-decimal log10 values, grams sorted by token-id sequence, one
    blank line between sections and none before the closing tag; two writes
    of the same model are byte-identical.
    """
    top = model.top_order()
    if top == 0:
        raise ValueError("cannot write an empty model")
    f.write("\\data\\\n")
    for k in range(1, top + 1):
        f.write(f"ngram {k}={model.order_size(k)}\n")
    for k in range(1, top + 1):
        f.write(f"\n\\{k}-grams:\n")
        for gram in sorted(model.grams(k)):
            logp, bow = model.lookup(gram)
            text = " ".join(model.vocab.token(t) for t in gram)
            if bow is None:
                f.write(f"{logp:.{PRECISION}f}\t{text}\n")
            else:
                f.write(f"{logp:.{PRECISION}f}\t{text}\t{bow:.{PRECISION}f}\n")
    f.write("\\end\\\n")


def read_arpa(f: TextIO, method: str = "unknown") -> BackoffModel:
    """Parse an ARPA file into a finalized model.

    The vocabulary is rebuilt from the unigram section in file order, so
    reading a canonically written file reproduces the original token ids.
    Structural problems (bad headers, count mismatches, grams without their
    prefixes) raise :class:`DataError` with the offending line number.
    """
    lines = f.read().splitlines()
    i = 0

    def fail(lineno: int, msg: str):
        raise DataError(f"ARPA line {lineno + 1}: {msg}")

    while i < len(lines) and not lines[i].strip():
        i += 1
    if i >= len(lines) or lines[i].strip() != "\\data\\":
        fail(min(i, len(lines) - 1), "expected \\data\\ header")
    i += 1
    declared: dict[int, int] = {}
    while i < len(lines):
        line = lines[i].strip()
        if not line:
            i += 1
            continue
        if line.startswith("\\"):
            break
        if not line.startswith("ngram "):
            fail(i, f"unexpected line in \\data\\ section: {line!r}")
        try:
            order_s, count_s = line[len("ngram "):].split("=")
            declared[int(order_s)] = int(count_s)
        except ValueError:
            fail(i, f"malformed ngram count line: {line!r}")
        i += 1
    if not declared:
        fail(i - 1, "no ngram counts declared")
    orders = sorted(declared)
    if orders != list(range(1, len(orders) + 1)):
        fail(i - 1, f"non-contiguous ngram orders {orders}")

    max_order = orders[-1]
    vocab = Vocabulary()
    raw: list[dict[tuple[str, ...], tuple[float, float | None]]] = [dict() for _ in orders]
    expected_k = 1
    while i < len(lines):
        line = lines[i].strip()
        if not line:
            i += 1
            continue
        if line == "\\end\\":
            break
        if not (line.startswith("\\") and line.endswith("-grams:")):
            fail(i, f"expected a section header, got {line!r}")
        try:
            k = int(line[1:-len("-grams:")])
        except ValueError:
            fail(i, f"malformed section header {line!r}")
        if k != expected_k:
            fail(i, f"section \\{k}-grams: out of order (expected {expected_k})")
        expected_k += 1
        i += 1
        section = raw[k - 1]
        while i < len(lines):
            line = lines[i]
            stripped = line.strip()
            if not stripped or stripped.startswith("\\"):
                break
            parts = stripped.split()
            if len(parts) == k + 1:
                bow = None
            elif len(parts) == k + 2:
                try:
                    bow = float(parts[-1])
                except ValueError:
                    fail(i, f"malformed back-off weight {parts[-1]!r}")
            else:
                fail(i, f"{len(parts)} fields on a {k}-gram line")
            try:
                logp = float(parts[0])
            except ValueError:
                fail(i, f"malformed log probability {parts[0]!r}")
            gram_tokens = tuple(parts[1 : k + 1])
            if gram_tokens in section:
                fail(i, f"duplicate gram {' '.join(gram_tokens)}")
            section[gram_tokens] = (logp, bow)
            if k == 1:
                vocab.add(gram_tokens[0])
            i += 1
    else:
        fail(len(lines) - 1, "missing \\end\\ tag")
    for k in orders:
        if len(raw[k - 1]) != declared[k]:
            fail(i, f"\\{k}-grams: declared {declared[k]} entries, found {len(raw[k - 1])}")

    vocab.seal()
    model = BackoffModel(vocab, max_order, method=method)
    for k in orders:
        for gram_tokens, (logp, bow) in raw[k - 1].items():
            try:
                gram = tuple(vocab.id(t) for t in gram_tokens)
            except KeyError as e:
                raise DataError(
                    f"gram {' '.join(gram_tokens)} uses token {e.args[0]!r} "
                    f"absent from the unigram section") from None
            model._orders[k - 1][gram] = [logp, bow]
    model._check_prefix_closure()
    # Values in a well-formed file are already quantized; sealing directly
    # preserves the file's back-off weights instead of rederiving them.
    for grams in model._orders:
        for cell in grams.values():
            cell[0] = _quantize(cell[0])
            if cell[1] is not None:
                cell[1] = _quantize(cell[1])
    model._finalized = True
    return model
