"""Subword vocabulary with reserved sentence and unknown markers."""

from __future__ import annotations

import hashlib
from collections.abc import Iterable

BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"

BOS_ID = 0
EOS_ID = 1
UNK_ID = 2

_RESERVED = (BOS, EOS, UNK)


class Vocabulary:
    """Bijective token <-> id mapping.

    Ids 0..2 are permanently assigned to the sentence-start, sentence-end
    and unknown tokens. The sentence-start token is a valid *context* token
    but is never predicted; helpers that need the predictable vocabulary
    should use :meth:`predictable_ids`.

    Construction is a single-writer phase; once :meth:`seal` has been
    called the instance is immutable and safe to share between readers.
    """

    def __init__(self, tokens: Iterable[str] = ()):
        self._tokens: list[str] = list(_RESERVED)
        self._ids: dict[str, int] = {t: i for i, t in enumerate(self._tokens)}
        self._sealed = False
        for t in tokens:
            self.add(t)

    def add(self, token: str) -> int:
        """Insert a token (idempotent) and return its id."""
        if self._sealed:
            raise RuntimeError("vocabulary is sealed")
        if not token:
            raise ValueError("empty token string")
        tid = self._ids.get(token)
        if tid is None:
            tid = len(self._tokens)
            self._tokens.append(token)
            self._ids[token] = tid
        return tid

    def seal(self) -> "Vocabulary":
        self._sealed = True
        return self

    @property
    def sealed(self) -> bool:
        return self._sealed

    def __len__(self) -> int:
        return len(self._tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._ids

    def id(self, token: str) -> int:
        """Exact lookup; raises KeyError for unknown tokens."""
        return self._ids[token]

    def id_or_unk(self, token: str) -> int:
        return self._ids.get(token, UNK_ID)

    def token(self, tid: int) -> str:
        return self._tokens[tid]

    @property
    def tokens(self) -> tuple[str, ...]:
        return tuple(self._tokens)

    def predictable_ids(self) -> list[int]:
        """All ids that a language model may emit (everything but <s>)."""
        return [i for i in range(len(self._tokens)) if i != BOS_ID]

    def encode(self, tokens: Iterable[str], strict: bool = False) -> list[int]:
        if strict:
            return [self._ids[t] for t in tokens]
        return [self._ids.get(t, UNK_ID) for t in tokens]

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self._tokens[i] for i in ids]

    def content_hash(self) -> bytes:
        """Stable digest of the token inventory, used to pair artifacts."""
        h = hashlib.sha256()
        for t in self._tokens:
            h.update(t.encode("utf-8"))
            h.update(b"\x00")
        return h.digest()

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Vocabulary) and self._tokens == other._tokens

    def __hash__(self):  # pragma: no cover - vocabularies are not dict keys
        return hash(tuple(self._tokens))


def vocab_from_sentences(sentences: Iterable[Iterable[str]]) -> Vocabulary:
    """Build and seal a vocabulary from tokenized sentences."""
    v = Vocabulary()
    for sent in sentences:
        for tok in sent:
            v.add(tok)
    return v.seal()


def write_vocab(path: str, vocab: Vocabulary) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for t in vocab.tokens:
            f.write(t + "\n")


def read_vocab(path: str) -> Vocabulary:
    with open(path, encoding="utf-8") as f:
        tokens = [line.rstrip("\n") for line in f if line.rstrip("\n")]
    if tokens[:3] != list(_RESERVED):
        raise ValueError(f"{path}: reserved tokens missing or reordered")
    v = Vocabulary()
    for t in tokens[3:]:
        v.add(t)
    return v.seal()
