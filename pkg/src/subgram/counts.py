"""N-gram occurrence counts and per-n-gram probability-mass accumulators.

Both structures are keyed by (history, word) so that all continuations of a
history are reachable in O(#continuations), are mergeable across corpus
shards, and become immutable once sealed.

Counting convention: sentences are padded with the sentence-start token as
context and the sentence-end token as a predicted word, so a gram is counted
once per *predicted* position it ends at. The start token therefore never
has a unigram count of its own, while every sentence contributes exactly
``len(sentence) + 1`` unigram events.
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from typing import BinaryIO

from . import _binio
from .vocab import BOS_ID, EOS_ID, Vocabulary

Gram = tuple[int, ...]


def padded(sentence: Sequence[int]) -> list[int]:
    return [BOS_ID, *sentence, EOS_ID]


def iter_positions(sentence: Sequence[int]):
    """Yield (history, word) per predicted position of a padded sentence."""
    pad = padded(sentence)
    for t in range(1, len(pad)):
        yield pad[:t], pad[t]


class CountTrie:
    """Exact counts of all n-grams up to a maximum order.

    Layout: ``order -> history tuple -> word id -> count``.
    """

    def __init__(self, vocab: Vocabulary, n_max: int):
        if n_max < 1:
            raise ValueError("n_max must be at least 1")
        self.vocab = vocab
        self.n_max = n_max
        self._orders: list[dict[Gram, dict[int, int]]] = [dict() for _ in range(n_max)]
        self._sealed = False

    def _check_mutable(self):
        if self._sealed:
            raise RuntimeError("count trie is sealed")

    def seal(self) -> "CountTrie":
        self._sealed = True
        return self

    def add_sentence(self, sentence: Sequence[int]) -> None:
        self._check_mutable()
        pad = padded(sentence)
        for t in range(1, len(pad)):
            w = pad[t]
            for k in range(1, self.n_max + 1):
                if t - k + 1 < 0:
                    break
                h = tuple(pad[t - k + 1 : t])
                by_word = self._orders[k - 1].setdefault(h, {})
                by_word[w] = by_word.get(w, 0) + 1

    def count(self, gram: Sequence[int]) -> int:
        gram = tuple(gram)
        if not 1 <= len(gram) <= self.n_max:
            return 0
        return self._orders[len(gram) - 1].get(gram[:-1], {}).get(gram[-1], 0)

    def continuations(self, history: Sequence[int]) -> dict[int, int]:
        """All stored (history, w) counts for one history."""
        order = len(history) + 1
        if order > self.n_max:
            return {}
        return dict(self._orders[order - 1].get(tuple(history), {}))

    def history_total(self, history: Sequence[int]) -> int:
        """Occurrences of `history` as a prediction context: sum of c(h w)."""
        order = len(history) + 1
        if order > self.n_max:
            return 0
        return sum(self._orders[order - 1].get(tuple(history), {}).values())

    def histories(self, order: int) -> Iterable[Gram]:
        """Stored histories whose continuations form grams of `order`."""
        return self._orders[order - 1].keys()

    def grams(self, order: int) -> Iterable[tuple[Gram, int, int]]:
        """Yield (history, word, count) for all stored grams of `order`."""
        for h, by_word in self._orders[order - 1].items():
            for w, c in by_word.items():
                yield h, w, c

    def order_size(self, order: int) -> int:
        return sum(len(v) for v in self._orders[order - 1].values())

    def total_unigrams(self) -> int:
        return sum(sum(v.values()) for v in self._orders[0].values())

    def continuation_count(self, word: int) -> int:
        """Number of distinct single-token contexts preceding `word`."""
        n = 0
        for by_word in self._orders[1].values():
            if word in by_word:
                n += 1
        return n

    def merge_from(self, other: "CountTrie") -> None:
        self._check_mutable()
        if other.vocab.content_hash() != self.vocab.content_hash():
            raise ValueError("cannot merge counts built on different vocabularies")
        if other.n_max != self.n_max:
            raise ValueError("cannot merge counts of different maximum order")
        for k in range(self.n_max):
            for h, by_word in other._orders[k].items():
                mine = self._orders[k].setdefault(h, {})
                for w, c in by_word.items():
                    mine[w] = mine.get(w, 0) + c

    def save(self, f: BinaryIO) -> None:
        _binio.write_header(f, b"CNTS", 1, self.vocab.content_hash())
        _binio.write_uvarint(f, self.n_max)
        for k in range(1, self.n_max + 1):
            entries = sorted(self.grams(k))
            _binio.write_uvarint(f, len(entries))
            for h, w, c in entries:
                for tid in h:
                    _binio.write_uvarint(f, tid)
                _binio.write_uvarint(f, w)
                _binio.write_uvarint(f, c)

    @classmethod
    def load(cls, f: BinaryIO, vocab: Vocabulary) -> "CountTrie":
        vocab_hash = _binio.read_header(f, b"CNTS", 1)
        if vocab_hash != vocab.content_hash():
            raise ValueError("count snapshot was built on a different vocabulary")
        n_max = _binio.read_uvarint(f)
        trie = cls(vocab, n_max)
        for k in range(1, n_max + 1):
            n_entries = _binio.read_uvarint(f)
            order = trie._orders[k - 1]
            for _ in range(n_entries):
                gram = tuple(_binio.read_uvarint(f) for _ in range(k))
                c = _binio.read_uvarint(f)
                order.setdefault(gram[:-1], {})[gram[-1]] = c
        return trie.seal()


def count_ngrams(sentences: Iterable[Sequence[int]], vocab: Vocabulary, n_max: int) -> CountTrie:
    """Count every n-gram of orders 1..n_max; histories never cross sentences."""
    trie = CountTrie(vocab, n_max)
    for sent in sentences:
        trie.add_sentence(sent)
    return trie


class ProbAccumulator:
    """Running sums of model probabilities per (history, word).

    Per entry it keeps ``sum_p`` (total accumulated probability mass) and
    ``hits`` (number of contributing corpus positions); per history it keeps
    how many positions used that history as context and, optionally, the
    summed mass of whole output vectors seen there (the full-vector
    normalizer of the probability-conversion method).
    """

    def __init__(self, vocab: Vocabulary, n_max: int):
        if n_max < 1:
            raise ValueError("n_max must be at least 1")
        self.vocab = vocab
        self.n_max = n_max
        # history -> word -> [sum_p, hits]
        self._entries: dict[Gram, dict[int, list]] = {}
        # history -> [positions, full-vector mass]
        self._contexts: dict[Gram, list] = {}
        self._sealed = False

    def _check_mutable(self):
        if self._sealed:
            raise RuntimeError("accumulator is sealed")

    def seal(self) -> "ProbAccumulator":
        self._sealed = True
        return self

    def add(self, history: Sequence[int], word: int, p: float) -> None:
        """Accumulate one probability contribution for (history, word)."""
        if not 0.0 < p <= 1.0:
            raise ValueError(f"probability {p} outside (0, 1]")
        self._check_mutable()
        by_word = self._entries.setdefault(tuple(history), {})
        cell = by_word.get(word)
        if cell is None:
            by_word[word] = [p, 1]
        else:
            cell[0] += p
            cell[1] += 1

    def add_position(self, history: Sequence[int],
                     contributions: Iterable[tuple[int, float]],
                     vector_mass: float = 0.0) -> None:
        """One corpus position's contributions to a single history.

        Equivalent to `add` per (word, p) pair plus one `add_context`, but
        with a single lookup of the history; this is the hot path of the
        top-K accumulation.
        """
        self._check_mutable()
        h = tuple(history)
        by_word = self._entries.setdefault(h, {})
        for word, p in contributions:
            if not 0.0 < p <= 1.0:
                raise ValueError(f"probability {p} outside (0, 1]")
            cell = by_word.get(word)
            if cell is None:
                by_word[word] = [p, 1]
            else:
                cell[0] += p
                cell[1] += 1
        if not by_word:
            del self._entries[h]
        cell = self._contexts.get(h)
        if cell is None:
            self._contexts[h] = [1, vector_mass]
        else:
            cell[0] += 1
            cell[1] += vector_mass

    def add_context(self, history: Sequence[int], vector_mass: float = 0.0) -> None:
        """Record one position whose context is `history`."""
        self._check_mutable()
        cell = self._contexts.get(tuple(history))
        if cell is None:
            self._contexts[tuple(history)] = [1, vector_mass]
        else:
            cell[0] += 1
            cell[1] += vector_mass

    def get(self, history: Sequence[int], word: int) -> tuple[float, int]:
        cell = self._entries.get(tuple(history), {}).get(word)
        if cell is None:
            return 0.0, 0
        return cell[0], cell[1]

    def continuations(self, history: Sequence[int]) -> dict[int, tuple[float, int]]:
        return {w: (c[0], c[1]) for w, c in self._entries.get(tuple(history), {}).items()}

    def context_positions(self, history: Sequence[int]) -> int:
        cell = self._contexts.get(tuple(history))
        return cell[0] if cell else 0

    def context_vector_mass(self, history: Sequence[int]) -> float:
        cell = self._contexts.get(tuple(history))
        return cell[1] if cell else 0.0

    def histories(self, order: int | None = None) -> list[Gram]:
        """Stored histories, optionally only those of a given gram order."""
        if order is None:
            return list(self._entries.keys())
        return [h for h in self._entries if len(h) == order - 1]

    def entries(self) -> Iterable[tuple[Gram, int, float, int]]:
        for h, by_word in self._entries.items():
            for w, (s, n) in by_word.items():
                yield h, w, s, n

    def order_size(self, order: int) -> int:
        return sum(len(v) for h, v in self._entries.items() if len(h) == order - 1)

    def merge_from(self, other: "ProbAccumulator") -> None:
        self._check_mutable()
        if other.vocab.content_hash() != self.vocab.content_hash():
            raise ValueError("cannot merge accumulators built on different vocabularies")
        if other.n_max != self.n_max:
            raise ValueError("cannot merge accumulators of different maximum order")
        for h, by_word in other._entries.items():
            mine = self._entries.setdefault(h, {})
            for w, (s, n) in by_word.items():
                cell = mine.get(w)
                if cell is None:
                    mine[w] = [s, n]
                else:
                    cell[0] += s
                    cell[1] += n
        for h, (pos, mass) in other._contexts.items():
            cell = self._contexts.get(h)
            if cell is None:
                self._contexts[h] = [pos, mass]
            else:
                cell[0] += pos
                cell[1] += mass

    def save(self, f: BinaryIO) -> None:
        _binio.write_header(f, b"ACCU", 1, self.vocab.content_hash())
        _binio.write_uvarint(f, self.n_max)
        hists = sorted(set(self._entries) | set(self._contexts), key=lambda h: (len(h), h))
        _binio.write_uvarint(f, len(hists))
        for h in hists:
            _binio.write_uvarint(f, len(h))
            for tid in h:
                _binio.write_uvarint(f, tid)
            pos, mass = self._contexts.get(h, [0, 0.0])
            _binio.write_uvarint(f, pos)
            _binio.write_f64(f, mass)
            by_word = self._entries.get(h, {})
            _binio.write_uvarint(f, len(by_word))
            for w in sorted(by_word):
                s, n = by_word[w]
                _binio.write_uvarint(f, w)
                _binio.write_f64(f, s)
                _binio.write_uvarint(f, n)

    @classmethod
    def load(cls, f: BinaryIO, vocab: Vocabulary) -> "ProbAccumulator":
        vocab_hash = _binio.read_header(f, b"ACCU", 1)
        if vocab_hash != vocab.content_hash():
            raise ValueError("accumulator snapshot was built on a different vocabulary")
        n_max = _binio.read_uvarint(f)
        acc = cls(vocab, n_max)
        n_hist = _binio.read_uvarint(f)
        for _ in range(n_hist):
            hlen = _binio.read_uvarint(f)
            h = tuple(_binio.read_uvarint(f) for _ in range(hlen))
            pos = _binio.read_uvarint(f)
            mass = _binio.read_f64(f)
            if pos or mass:
                acc._contexts[h] = [pos, mass]
            n_words = _binio.read_uvarint(f)
            if n_words:
                by_word = acc._entries.setdefault(h, {})
                for _ in range(n_words):
                    w = _binio.read_uvarint(f)
                    s = _binio.read_f64(f)
                    n = _binio.read_uvarint(f)
                    by_word[w] = [s, n]
        return acc.seal()


def merge_counts(a: CountTrie, b: CountTrie) -> CountTrie:
    """Pointwise sum of two count tries (associative and commutative)."""
    out = CountTrie(a.vocab, a.n_max)
    out.merge_from(a)
    out.merge_from(b)
    return out


def merge_accumulators(a: ProbAccumulator, b: ProbAccumulator) -> ProbAccumulator:
    """Pointwise sum of two accumulators (associative and commutative)."""
    out = ProbAccumulator(a.vocab, a.n_max)
    out.merge_from(a)
    out.merge_from(b)
    return out
