"""Shared fixtures: a deterministic toy corpus and a small trained scorer."""

import numpy as np
import pytest

from subgram.rnn import RnnConfig, train_rnn
from subgram.segmentation import MarkingScheme, segment_sentence
from subgram.vocab import vocab_from_sentences

WORDS = ["ab", "ba", "abc", "cab", "ad", "dab", "bad", "ca", "abd", "bc"]


def make_word_sentences(n_sentences: int, seed: int = 12345) -> list[list[str]]:
    rng = np.random.default_rng(seed)
    sentences = []
    for _ in range(n_sentences):
        length = int(rng.integers(2, 6))
        sentences.append([WORDS[int(i)] for i in rng.integers(0, len(WORDS), length)])
    return sentences


@pytest.fixture(scope="session")
def scheme():
    return MarkingScheme("right")


@pytest.fixture(scope="session")
def fixture_words():
    return make_word_sentences(50)


@pytest.fixture(scope="session")
def fixture_corpus(fixture_words, scheme):
    """Fifty character-segmented sentences; vocabulary stays under 30."""
    return [segment_sentence(words, scheme) for words in fixture_words]


@pytest.fixture(scope="session")
def fixture_vocab(fixture_corpus):
    return vocab_from_sentences(fixture_corpus)


@pytest.fixture(scope="session")
def fixture_ids(fixture_corpus, fixture_vocab):
    return [fixture_vocab.encode(s) for s in fixture_corpus]


@pytest.fixture(scope="session")
def fixture_rnn(fixture_ids, fixture_vocab):
    config = RnnConfig(embed_dim=8, hidden_dim=16, epochs=8, learning_rate=0.1, seed=42)
    return train_rnn(fixture_ids, fixture_vocab, config)


@pytest.fixture(scope="session")
def heldout_ids(fixture_vocab, scheme):
    sentences = make_word_sentences(10, seed=777)
    return [fixture_vocab.encode(segment_sentence(w, scheme)) for w in sentences]
