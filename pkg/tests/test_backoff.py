import io
import math

import pytest

from subgram.backoff import (
    BackoffModel,
    InterpolationSpec,
    floor_log10,
    interpolate,
    perplexity,
    read_arpa,
    validate_normalization,
    write_arpa,
)
from subgram.errors import DataError
from subgram.vocab import BOS_ID, UNK_ID, Vocabulary, vocab_from_sentences


def toy_vocab():
    return Vocabulary(["a", "b"]).seal()


def unigram_model(vocab, probs: dict[str, float]) -> BackoffModel:
    m = BackoffModel(vocab, 1)
    m.add_gram((BOS_ID,), -99.0)
    for tok, p in probs.items():
        m.add_gram((vocab.id(tok),), floor_log10(p))
    return m.finalize()


def toy_bigram_model() -> BackoffModel:
    vocab = toy_vocab()
    m = BackoffModel(vocab, 2)
    m.add_gram((BOS_ID,), -99.0)
    for tok, p in {"</s>": 0.15, "<unk>": 0.05, "a": 0.5, "b": 0.3}.items():
        m.add_gram((vocab.id(tok),), floor_log10(p))
    m.add_gram((vocab.id("a"), vocab.id("b")), floor_log10(0.7))
    return m.finalize()


class TestQuery:
    def test_stored_gram_returns_explicit_value(self):
        m = toy_bigram_model()
        a, b = m.vocab.id("a"), m.vocab.id("b")
        assert m.query((a,), b) == round(math.log10(0.7), 7)

    def test_backoff_recursion_hand_checked(self):
        m = toy_bigram_model()
        a, b = m.vocab.id("a"), m.vocab.id("b")
        # bow(a) = (1 - 0.7) / (1 - 0.3), applied to the unigram of a
        bow = (1.0 - 10 ** m.query((a,), b)) / (1.0 - 0.3)
        want = round(math.log10(bow), 7) + m.query((), a)
        assert m.query((a,), a) == pytest.approx(want, abs=1e-9)

    def test_long_history_truncated(self):
        m = toy_bigram_model()
        a, b = m.vocab.id("a"), m.vocab.id("b")
        assert m.query((b, b, a), b) == m.query((a,), b)

    def test_unknown_token_maps_to_unk_at_token_boundary(self):
        m = toy_bigram_model()
        assert m.query_tokens(["a"], "zzz") == m.query((m.vocab.id("a"),), UNK_ID)

    def test_every_vocab_token_has_positive_unigram(self):
        m = toy_bigram_model()
        for tid in range(len(m.vocab)):
            assert m.query((), tid) <= 0.0


class TestPerplexity:
    def test_uniform_unigram_model(self):
        vocab = vocab_from_sentences([["a", "b", "c"]])
        n = len(vocab) - 1
        m = unigram_model(vocab, {t: 1.0 / n for t in ("</s>", "<unk>", "a", "b", "c")})
        ppl = perplexity(m, [["a", "b"], ["c"]])
        assert ppl == pytest.approx(n, rel=1e-5)

    def test_trained_model_beats_uniform(self, fixture_corpus):
        from subgram.estimators import KneserNeyLanguageModel

        est = KneserNeyLanguageModel(max_order=3).fit(fixture_corpus)
        assert est.perplexity(fixture_corpus) < len(est.vocab_) - 1

    def test_self_interpolation_preserves_perplexity(self):
        m = toy_bigram_model()
        corpus = [["a", "b"], ["b", "a", "a"]]
        mix = interpolate(m, m, InterpolationSpec(0.5))
        assert perplexity(mix, corpus) == pytest.approx(perplexity(m, corpus), abs=1e-12)

    def test_empty_corpus_rejected(self):
        with pytest.raises(ValueError):
            perplexity(toy_bigram_model(), [])


class TestArpaFormat:
    def test_two_entry_unigram_model_is_seven_lines(self):
        vocab = toy_vocab()
        m = BackoffModel(vocab, 1)
        m.add_gram((vocab.id("a"),), floor_log10(0.6))
        m.add_gram((vocab.id("b"),), floor_log10(0.4))
        m.finalize()
        buf = io.StringIO()
        write_arpa(m, buf)
        lines = buf.getvalue().splitlines()
        assert len(lines) == 7
        assert lines[0] == "\\data\\"
        assert lines[1] == "ngram 1=2"
        assert lines[3] == "\\1-grams:"
        assert lines[6] == "\\end\\"

    def test_round_trip_query_identical(self, fixture_corpus):
        from subgram.estimators import KneserNeyLanguageModel

        m = KneserNeyLanguageModel(max_order=3).fit(fixture_corpus).model_
        buf = io.StringIO()
        write_arpa(m, buf)
        loaded = read_arpa(io.StringIO(buf.getvalue()))
        assert loaded.vocab.tokens == m.vocab.tokens
        worst = 0.0
        for k in range(1, m.top_order() + 1):
            for g in m.grams(k):
                worst = max(worst, abs(loaded.query(g[:-1], g[-1]) - m.query(g[:-1], g[-1])))
        for w1 in range(len(m.vocab)):
            for w2 in m.vocab.predictable_ids():
                worst = max(worst, abs(loaded.query((w1,), w2) - m.query((w1,), w2)))
        assert worst < 1e-6

    def test_second_write_byte_identical(self, fixture_corpus):
        from subgram.estimators import KneserNeyLanguageModel

        m = KneserNeyLanguageModel(max_order=3).fit(fixture_corpus).model_
        buf1 = io.StringIO()
        write_arpa(m, buf1)
        text1 = buf1.getvalue()
        buf2 = io.StringIO()
        write_arpa(read_arpa(io.StringIO(text1)), buf2)
        assert buf2.getvalue() == text1

    def test_count_mismatch_detected_at_end_check(self):
        text = ("\\data\\\nngram 1=2\nngram 2=3\n\n\\1-grams:\n"
                "-0.5\ta\t-0.1\n-0.3\tb\n\n\\2-grams:\n"
                "-0.2\ta b\n-0.4\ta a\n\\end\\\n")
        with pytest.raises(DataError, match="2-grams"):
            read_arpa(io.StringIO(text))

    def test_missing_end_tag(self):
        text = "\\data\\\nngram 1=1\n\n\\1-grams:\n-0.5\ta\n"
        with pytest.raises(DataError, match="end"):
            read_arpa(io.StringIO(text))

    def test_non_prefix_closed_entries_rejected(self):
        # trigram a b a present but its prefix bigram a b is not
        text = ("\\data\\\nngram 1=2\nngram 2=1\nngram 3=1\n\n"
                "\\1-grams:\n-0.1\ta\t-0.1\n-0.2\tb\t-0.1\n\n"
                "\\2-grams:\n-0.2\tb a\t-0.1\n\n"
                "\\3-grams:\n-0.3\ta b a\n\\end\\\n")
        with pytest.raises(DataError, match="prefix"):
            read_arpa(io.StringIO(text))

    def test_bad_header_reports_line(self):
        with pytest.raises(DataError, match="line 1"):
            read_arpa(io.StringIO("not an arpa file\n"))

    def test_field_count_validated(self):
        text = "\\data\\\nngram 1=1\n\n\\1-grams:\n-0.5 a b c\n\\end\\\n"
        with pytest.raises(DataError, match="fields"):
            read_arpa(io.StringIO(text))

    def test_probability_floor_written_as_minus_99(self):
        m = toy_bigram_model()
        buf = io.StringIO()
        write_arpa(m, buf)
        assert "-99.0000000\t<s>" in buf.getvalue()


class TestInterpolation:
    def test_halfway_mix_of_unigram_models(self):
        vocab = toy_vocab()
        a = unigram_model(vocab, {"a": 0.8, "b": 0.1, "</s>": 0.05, "<unk>": 0.05})
        b = unigram_model(vocab, {"a": 0.4, "b": 0.3, "</s>": 0.2, "<unk>": 0.1})
        mix = interpolate(a, b, InterpolationSpec(0.5))
        assert 10 ** mix.query((), vocab.id("a")) == pytest.approx(0.6, abs=1e-6)
        assert 10 ** mix.query((), vocab.id("b")) == pytest.approx(0.2, abs=1e-6)

    def test_lambda_one_query_identical_everywhere(self, fixture_corpus):
        from subgram.estimators import KneserNeyLanguageModel, TopKApproximatedLanguageModel
        from subgram.estimators import RnnLanguageModel

        kn = KneserNeyLanguageModel(max_order=2).fit(fixture_corpus).model_
        ours = TopKApproximatedLanguageModel(
            scorer=RnnLanguageModel(embed_dim=6, hidden_dim=8, epochs=2, seed=5),
            top_k=2, max_order=2, epsilon=0.0).fit(fixture_corpus).model_
        mix = interpolate(kn, ours, InterpolationSpec(1.0))
        vocab = kn.vocab
        worst = 0.0
        for w1 in range(len(vocab)):
            for w2 in vocab.predictable_ids():
                worst = max(worst, abs(mix.query((w1,), w2) - kn.query((w1,), w2)))
                worst = max(worst, abs(mix.query((w1, w2), w2) - kn.query((w1, w2), w2)))
        assert worst < 1e-9

    def test_stored_grams_mix_linearly(self, fixture_corpus):
        from subgram.estimators import KneserNeyLanguageModel

        a = KneserNeyLanguageModel(max_order=3, discount=0.4).fit(fixture_corpus).model_
        b = KneserNeyLanguageModel(max_order=2, discount=0.7).fit(fixture_corpus).model_
        for lam in (0.0, 0.25, 0.5, 1.0):
            mix = interpolate(a, b, InterpolationSpec(lam))
            for k in range(1, mix.top_order() + 1):
                for g in mix.grams(k):
                    want = lam * 10 ** a.query(g[:-1], g[-1]) \
                        + (1 - lam) * 10 ** b.query(g[:-1], g[-1])
                    assert 10 ** mix.query(g[:-1], g[-1]) == pytest.approx(want, abs=1e-6)

    def test_interpolated_model_normalizes(self, fixture_corpus):
        from subgram.estimators import KneserNeyLanguageModel

        a = KneserNeyLanguageModel(max_order=3, discount=0.4).fit(fixture_corpus).model_
        b = KneserNeyLanguageModel(max_order=2, discount=0.7).fit(fixture_corpus).model_
        mix = interpolate(a, b, InterpolationSpec(0.5))
        assert validate_normalization(mix).max_deviation < 1e-4

    def test_vocab_mismatch_rejected(self):
        a = unigram_model(toy_vocab(), {"a": 0.5, "b": 0.3, "</s>": 0.1, "<unk>": 0.1})
        other = Vocabulary(["a", "z"]).seal()
        b = unigram_model(other, {"a": 0.5, "z": 0.3, "</s>": 0.1, "<unk>": 0.1})
        with pytest.raises(ValueError):
            interpolate(a, b, InterpolationSpec(0.5))

    def test_invalid_weight_rejected(self):
        with pytest.raises(ValueError):
            InterpolationSpec(1.5)


class TestBinarySnapshot:
    def test_round_trip_bit_exact(self, fixture_corpus):
        from subgram.estimators import KneserNeyLanguageModel

        m = KneserNeyLanguageModel(max_order=3).fit(fixture_corpus).model_
        buf = io.BytesIO()
        m.save(buf)
        buf.seek(0)
        loaded = BackoffModel.load(buf)
        assert loaded.vocab.tokens == m.vocab.tokens
        assert loaded.method == m.method
        for k in range(1, m.top_order() + 1):
            assert set(loaded.grams(k)) == set(m.grams(k))
            for g in m.grams(k):
                assert loaded.lookup(g) == m.lookup(g)
                assert loaded.mass(g) == m.mass(g)

    def test_corrupt_snapshot_rejected(self):
        with pytest.raises((ValueError, EOFError)):
            BackoffModel.load(io.BytesIO(b"SGBFBOFF\x01" + b"\x00" * 40))


class TestNormalizationValidator:
    def test_builder_output_passes(self, fixture_corpus):
        from subgram.estimators import KneserNeyLanguageModel

        m = KneserNeyLanguageModel(max_order=3).fit(fixture_corpus).model_
        report = validate_normalization(m)
        assert report.ok
        assert report.max_deviation < 1e-4

    def test_broken_bow_is_detected(self):
        m = toy_bigram_model()
        a = m.vocab.id("a")
        m._orders[0][(a,)][1] = -0.5
        report = validate_normalization(m)
        assert not report.ok
        assert report.worst_context == (a,)

    def test_unigram_only_model_near_exact(self):
        # Probabilities with exactly representable 6-decimal logs keep the
        # deviation at float-rounding level.
        vocab = Vocabulary([f"t{i}" for i in range(8)]).seal()
        m = unigram_model(vocab, {t: 0.1 for t in
                                  ["</s>", "<unk>", *(f"t{i}" for i in range(8))]})
        report = validate_normalization(m)
        assert report.contexts_checked == 1
        assert report.max_deviation < 1e-9

    def test_enumeration_guard(self, fixture_corpus):
        from subgram.estimators import KneserNeyLanguageModel

        m = KneserNeyLanguageModel(max_order=3).fit(fixture_corpus).model_
        with pytest.raises(ValueError):
            validate_normalization(m, pair_guard=10)
