import io

import numpy as np
import pytest

from subgram.rnn import RnnParams
from subgram.stream import (
    StreamReader,
    emit_scorer_stream,
    replay_prefixes,
    topk_excluding,
    write_stream,
)
from subgram.vocab import BOS_ID, EOS_ID, vocab_from_sentences


def uniform_params(vocab_size: int) -> RnnParams:
    return RnnParams(
        emb=np.zeros((vocab_size, 2)),
        w_rec=np.zeros((2, 4)),
        b_rec=np.zeros(2),
        w_out=np.zeros((vocab_size, 2)),
        b_out=np.zeros(vocab_size),
        seed=0,
    )


class TestTopK:
    def test_excludes_observed_and_sorts_descending(self, fixture_rnn):
        vec = np.array([0.05, 0.3, 0.1, 0.25, 0.2, 0.1])
        vec /= vec.sum()
        got = topk_excluding(vec, observed=1, k=3)
        assert [tid for tid, _ in got] == [3, 4, 2]
        probs = [p for _, p in got]
        assert probs == sorted(probs, reverse=True)

    def test_ties_break_by_ascending_id(self):
        vec = np.full(5, 0.2)
        got = topk_excluding(vec, observed=0, k=2)
        assert got == [(1, 0.2), (2, 0.2)]

    def test_k_zero_empty(self):
        assert topk_excluding(np.array([0.5, 0.5]), 0, 0) == []

    def test_k_vocab_gives_all_but_observed(self):
        vec = np.array([0.1, 0.2, 0.3, 0.4])
        got = topk_excluding(vec, observed=2, k=4)
        assert len(got) == 3
        assert 2 not in [tid for tid, _ in got]


class TestEmission:
    def test_one_record_per_predicted_position(self, fixture_rnn, fixture_ids):
        records = list(emit_scorer_stream(fixture_rnn, fixture_ids, 2))
        assert len(records) == sum(len(s) + 1 for s in fixture_ids)
        eos_count = sum(1 for r in records if r.observed == EOS_ID)
        assert eos_count == len(fixture_ids)

    def test_uniform_model_k2(self):
        vocab = vocab_from_sentences([["a", "b", "c"]])
        params = uniform_params(len(vocab))
        ids = [vocab.encode(["a", "b"])]
        records = list(emit_scorer_stream(params, ids, 2))
        first = records[0]
        assert first.observed == vocab.id("a")
        assert first.p_obs == pytest.approx(1 / len(vocab))
        low_ids = [tid for tid in range(len(vocab)) if tid != first.observed][:2]
        assert [tid for tid, _ in first.topk] == low_ids
        for _tid, p in first.topk:
            assert p == pytest.approx(1 / len(vocab))

    def test_negative_k_rejected(self, fixture_rnn, fixture_ids):
        with pytest.raises(ValueError):
            list(emit_scorer_stream(fixture_rnn, fixture_ids, -1))

    def test_replay_reconstructs_prefixes(self, fixture_rnn, fixture_ids):
        records = emit_scorer_stream(fixture_rnn, fixture_ids[:5], 0)
        seen = []
        for prefix, rec in replay_prefixes(records):
            seen.append((tuple(prefix), rec.observed))
        expected = []
        for sent in fixture_ids[:5]:
            pad = [BOS_ID, *sent, EOS_ID]
            for t in range(1, len(pad)):
                expected.append((tuple(pad[:t]), pad[t]))
        assert seen == expected


class TestStreamFile:
    def round_trip(self, fixture_rnn, fixture_vocab, fixture_ids, k, full):
        records = list(emit_scorer_stream(fixture_rnn, fixture_ids[:8], k, full))
        buf = io.BytesIO()
        n = write_stream(buf, records, fixture_vocab, k, full)
        assert n == len(records)
        buf.seek(0)
        reader = StreamReader(buf, fixture_vocab)
        assert reader.k == k and reader.full_vectors == full
        loaded = list(reader)
        assert len(loaded) == len(records)
        for got, want in zip(loaded, records):
            assert got.observed == want.observed
            assert got.p_obs == want.p_obs
            assert got.topk == want.topk
            if full:
                assert np.array_equal(got.full, want.full)
        return records

    def test_round_trip_topk_only(self, fixture_rnn, fixture_vocab, fixture_ids):
        self.round_trip(fixture_rnn, fixture_vocab, fixture_ids, 3, False)

    def test_round_trip_full_vectors(self, fixture_rnn, fixture_vocab, fixture_ids):
        self.round_trip(fixture_rnn, fixture_vocab, fixture_ids, 0, True)

    def test_emission_is_byte_deterministic(self, fixture_rnn, fixture_vocab, fixture_ids):
        def emit_bytes():
            buf = io.BytesIO()
            write_stream(buf, emit_scorer_stream(fixture_rnn, fixture_ids, 2),
                         fixture_vocab, 2, False)
            return buf.getvalue()

        assert emit_bytes() == emit_bytes()

    def test_vocab_mismatch_rejected(self, fixture_rnn, fixture_vocab, fixture_ids):
        buf = io.BytesIO()
        write_stream(buf, emit_scorer_stream(fixture_rnn, fixture_ids[:2], 1),
                     fixture_vocab, 1, False)
        buf.seek(0)
        with pytest.raises(ValueError):
            StreamReader(buf, vocab_from_sentences([["zzz"]]))

    def test_topk_length_enforced(self, fixture_rnn, fixture_vocab, fixture_ids):
        records = list(emit_scorer_stream(fixture_rnn, fixture_ids[:2], 1))
        buf = io.BytesIO()
        with pytest.raises(ValueError):
            write_stream(buf, records, fixture_vocab, 2, False)
