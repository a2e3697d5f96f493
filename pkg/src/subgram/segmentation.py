"""Boundary-marked subword segmentation and its inverse.

Words are split either per character (extended grapheme clusters) or per an
externally supplied segmentation map, and the pieces are decorated with a
boundary marker so that the original word sequence is recoverable from a
flat subword stream. Two marking conventions are supported:

* ``right``: every non-final piece of a word gets a trailing marker
  (``international -> inter+ nation+ al``)
* ``both``: additionally every non-initial piece gets a leading marker
  (``international -> inter+ +nation+ +al``)
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass

import regex

RIGHT_MARKED = "right"
BOTH_MARKED = "both"

_GRAPHEME = regex.compile(r"\X")


def graphemes(text: str) -> list[str]:
    """Split into extended grapheme clusters (combining marks stay attached)."""
    return _GRAPHEME.findall(text)


@dataclass(frozen=True)
class MarkingScheme:
    variant: str = RIGHT_MARKED
    marker: str = "+"

    def __post_init__(self):
        if self.variant not in (RIGHT_MARKED, BOTH_MARKED):
            raise ValueError(f"unknown marking variant: {self.variant!r}")
        if not self.marker:
            raise ValueError("marker must be non-empty")


class SegmentationMap:
    """word -> list of unmarked subword units, e.g. from a Morfessor run.

    Each entry must concatenate back to its word; words absent from the
    map fall back to character segmentation.
    """

    def __init__(self, entries: dict[str, Sequence[str]] | None = None):
        self._entries: dict[str, tuple[str, ...]] = {}
        if entries:
            for word, units in entries.items():
                self.add(word, units)

    def add(self, word: str, units: Sequence[str]) -> None:
        units = tuple(units)
        if "".join(units) != word:
            raise ValueError(f"units {units!r} do not concatenate to {word!r}")
        if not all(units):
            raise ValueError(f"empty unit in segmentation of {word!r}")
        self._entries[word] = units

    def get(self, word: str) -> tuple[str, ...] | None:
        return self._entries.get(word)

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, word: str) -> bool:
        return word in self._entries


def read_segmentation_map(path: str) -> SegmentationMap:
    """Read ``word<TAB>sub1 sub2 ...`` lines (units unmarked)."""
    smap = SegmentationMap()
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                word, units = line.split("\t", 1)
            except ValueError:
                raise ValueError(f"{path}:{lineno}: expected word<TAB>units") from None
            smap.add(word, units.split())
    return smap


def _apply_marks(units: Sequence[str], scheme: MarkingScheme) -> list[str]:
    m = scheme.marker
    out = []
    last = len(units) - 1
    for i, u in enumerate(units):
        if scheme.variant == BOTH_MARKED and i > 0:
            u = m + u
        if i < last:
            u = u + m
        out.append(u)
    return out


def segment_word(
    word: str,
    scheme: MarkingScheme,
    smap: SegmentationMap | None = None,
) -> list[str]:
    """Split one word into marked subwords.

    Uses the map entry when available, per-grapheme splitting otherwise.
    Words containing the marker character are rejected rather than escaped.
    """
    if not word:
        raise ValueError("cannot segment an empty word")
    if scheme.marker in word:
        raise ValueError(f"word {word!r} contains the marker {scheme.marker!r}")
    units = smap.get(word) if smap is not None else None
    if units is None:
        units = graphemes(word)
    return _apply_marks(units, scheme)


def segment_sentence(
    words: Sequence[str],
    scheme: MarkingScheme,
    smap: SegmentationMap | None = None,
) -> list[str]:
    out: list[str] = []
    for w in words:
        out.extend(segment_word(w, scheme, smap))
    return out


def reconstruct(tokens: Sequence[str], scheme: MarkingScheme) -> list[str]:
    """Invert segmentation: marked subword stream -> word list.

    Raises ValueError on marker-grammar violations (a word left open at the
    end of the stream, or a continuation piece with no word to continue).
    """
    m = scheme.marker
    words: list[str] = []
    current: list[str] = []
    for tok in tokens:
        if not tok:
            raise ValueError("empty token in subword stream")
        piece = tok
        continues_left = False
        if scheme.variant == BOTH_MARKED and piece.startswith(m):
            piece = piece[len(m):]
            continues_left = True
        continues_right = piece.endswith(m) and len(piece) > len(m)
        if piece.endswith(m):
            piece = piece[: -len(m)] if len(piece) > len(m) else piece
        if scheme.variant == BOTH_MARKED:
            if continues_left and not current:
                raise ValueError(f"continuation token {tok!r} at word start")
            if not continues_left and current:
                raise ValueError(f"unmarked word-start token {tok!r} inside a word")
        if not piece:
            raise ValueError(f"token {tok!r} carries no content")
        current.append(piece)
        if not continues_right:
            words.append("".join(current))
            current = []
    if current:
        raise ValueError("subword stream ends in the middle of a word")
    return words


def extract_oov_keywords(train_words: Iterable[str], test_words: Iterable[str]) -> list[str]:
    """Test-set words usable as OOV keywords.

    Keeps words absent from the training set, then drops single-character
    words and words containing any character the training words never use.
    """
    train = set(train_words)
    train_chars = {g for w in train for g in graphemes(w)}
    kept = []
    for w in set(test_words):
        if w in train:
            continue
        gs = graphemes(w)
        if len(gs) <= 1:
            continue
        if any(g not in train_chars for g in gs):
            continue
        kept.append(w)
    return sorted(kept)


@dataclass(frozen=True)
class LengthStats:
    """Mean number of subwords per occurrence for a designated word set."""

    mean: float
    occurrences: int
    subwords: int


def length_stats(
    segmented_sentences: Iterable[Sequence[str]],
    word_set: Iterable[str],
    scheme: MarkingScheme,
) -> LengthStats:
    """Average subwords-per-occurrence of `word_set` in a segmented corpus.

    Each sentence is a flat marked-subword sequence; occurrences are found
    by reconstructing words and re-aligning them with their pieces.
    """
    wanted = set(word_set)
    occ = 0
    total = 0
    m = scheme.marker
    for sent in segmented_sentences:
        count = 0
        word_parts: list[str] = []
        for tok in sent:
            count += 1
            piece = tok
            if scheme.variant == BOTH_MARKED and piece.startswith(m):
                piece = piece[len(m):]
            ends_word = not (piece.endswith(m) and len(piece) > len(m))
            if not ends_word:
                piece = piece[: -len(m)]
            word_parts.append(piece)
            if ends_word:
                word = "".join(word_parts)
                if word in wanted:
                    occ += 1
                    total += count
                word_parts = []
                count = 0
    if occ == 0:
        raise ValueError("word set has no occurrences in the corpus")
    return LengthStats(mean=total / occ, occurrences=occ, subwords=total)


def read_corpus(path: str) -> list[list[str]]:
    """One sentence per line, subwords separated by single spaces."""
    sentences = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            toks = line.split()
            if toks:
                sentences.append(toks)
    return sentences


def write_corpus(path: str, sentences: Iterable[Sequence[str]]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for sent in sentences:
            f.write(" ".join(sent) + "\n")


def read_keyword_list(path: str) -> dict[str, list[str]]:
    """Keyword file: ``kwid word [word ...]`` per line; returns id -> words."""
    keywords: dict[str, list[str]] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) < 2:
                raise ValueError(f"{path}:{lineno}: expected 'kwid word...'")
            keywords[parts[0]] = parts[1:]
    return keywords
