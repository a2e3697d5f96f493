import pytest

from subgram.segmentation import (
    LengthStats,
    MarkingScheme,
    SegmentationMap,
    extract_oov_keywords,
    graphemes,
    length_stats,
    read_segmentation_map,
    reconstruct,
    segment_sentence,
    segment_word,
)

RIGHT = MarkingScheme("right")
BOTH = MarkingScheme("both")


class TestSegmentWord:
    def test_map_right_marked(self):
        smap = SegmentationMap({"international": ["inter", "nation", "al"]})
        assert segment_word("international", RIGHT, smap) == ["inter+", "nation+", "al"]

    def test_map_both_marked(self):
        smap = SegmentationMap({"international": ["inter", "nation", "al"]})
        assert segment_word("international", BOTH, smap) == ["inter+", "+nation+", "+al"]

    def test_single_character_gets_no_marker(self):
        assert segment_word("a", RIGHT) == ["a"]
        assert segment_word("a", BOTH) == ["a"]

    def test_character_fallback(self):
        assert segment_word("abc", RIGHT) == ["a+", "b+", "c"]
        assert segment_word("abc", BOTH) == ["a+", "+b+", "+c"]

    def test_word_absent_from_map_falls_back_to_characters(self):
        smap = SegmentationMap({"other": ["oth", "er"]})
        assert segment_word("ab", RIGHT, smap) == ["a+", "b"]

    def test_marker_in_word_rejected(self):
        with pytest.raises(ValueError):
            segment_word("a+b", RIGHT)

    def test_empty_word_rejected(self):
        with pytest.raises(ValueError):
            segment_word("", RIGHT)

    def test_combining_marks_stay_on_their_base(self):
        # 'a' + combining acute is one grapheme cluster, not two tokens
        word = "bád"
        assert graphemes(word) == ["b", "á", "d"]
        assert segment_word(word, RIGHT) == ["b+", "á+", "d"]


class TestReconstruct:
    def test_inverts_marked_segmentation(self):
        assert reconstruct(["inter+", "nation+", "al"], RIGHT) == ["international"]
        assert reconstruct(["inter+", "+nation+", "+al"], BOTH) == ["international"]

    def test_empty(self):
        assert reconstruct([], RIGHT) == []
        assert reconstruct([], BOTH) == []

    def test_marker_grammar_by_hand(self):
        assert reconstruct(["a+", "b+", "c", "d"], RIGHT) == ["abc", "d"]

    def test_dangling_marker_rejected(self):
        with pytest.raises(ValueError):
            reconstruct(["a+", "b+"], RIGHT)

    def test_orphan_continuation_rejected(self):
        with pytest.raises(ValueError):
            reconstruct(["+ab"], BOTH)

    def test_unmarked_start_inside_word_rejected(self):
        with pytest.raises(ValueError):
            reconstruct(["a+", "b+", "c"], BOTH)

    def test_round_trip_random_words(self):
        import numpy as np

        rng = np.random.default_rng(7)
        alphabet = list("abcdef") + ["ا", "ب", "ت", "g̈"]
        for _ in range(200):
            word = "".join(alphabet[i] for i in rng.integers(0, len(alphabet), rng.integers(1, 9)))
            for scheme in (RIGHT, BOTH):
                assert reconstruct(segment_word(word, scheme), scheme) == [word]

    def test_round_trip_sentences(self):
        words = ["abc", "de", "f", "abcd"]
        for scheme in (RIGHT, BOTH):
            assert reconstruct(segment_sentence(words, scheme), scheme) == words

    def test_marker_grammar_invariant(self):
        toks = segment_word("abcd", RIGHT)
        assert [t.endswith("+") for t in toks] == [True, True, True, False]
        toks = segment_word("abcd", BOTH)
        assert [t.startswith("+") for t in toks] == [False, True, True, True]


class TestOovKeywords:
    def test_in_vocabulary_and_unseen_char_filtering(self):
        assert extract_oov_keywords({"ab", "bc"}, {"ab", "cab", "x"}) == ["cab"]

    def test_no_oovs(self):
        train = {"ab", "cd"}
        assert extract_oov_keywords(train, train) == []

    def test_single_character_removed(self):
        assert extract_oov_keywords({"ab"}, {"ba", "b"}) == ["ba"]

    def test_unseen_character_removed(self):
        assert extract_oov_keywords({"ab"}, {"ax", "ba"}) == ["ba"]

    def test_output_disjoint_and_no_short_words(self):
        import numpy as np

        rng = np.random.default_rng(11)
        alphabet = "abcde"
        def words(n, seed_off):
            return {"".join(alphabet[i] for i in rng.integers(0, 5, rng.integers(1, 6)))
                    for _ in range(n)}
        train, test = words(30, 0), words(30, 1)
        out = extract_oov_keywords(train, test)
        assert not set(out) & train
        assert all(len(w) > 1 for w in out)
        assert out == sorted(out)


class TestLengthStats:
    def test_hand_example(self, scheme):
        sents = [segment_sentence(["ab", "ab", "abc"], scheme)]
        stats = length_stats(sents, {"ab", "abc"}, scheme)
        assert stats.occurrences == 3
        assert stats.subwords == 7
        assert stats.mean == pytest.approx(7 / 3)

    def test_single_character_words(self, scheme):
        sents = [segment_sentence(["a", "b", "a"], scheme)]
        assert length_stats(sents, {"a", "b"}, scheme).mean == 1.0

    def test_absent_word_set_rejected(self, scheme):
        sents = [segment_sentence(["ab"], scheme)]
        with pytest.raises(ValueError):
            length_stats(sents, {"zz"}, scheme)

    def test_counts_only_requested_words(self, scheme):
        sents = [segment_sentence(["ab", "xyz"], scheme)]
        stats = length_stats(sents, {"xyz"}, scheme)
        assert stats == LengthStats(mean=3.0, occurrences=1, subwords=3)

    def test_both_marked_corpus(self):
        sents = [segment_sentence(["ab", "ab", "abc"], BOTH)]
        stats = length_stats(sents, {"ab", "abc"}, BOTH)
        assert stats.mean == pytest.approx(7 / 3)


class TestSegmentationMap:
    def test_entries_must_concatenate(self):
        with pytest.raises(ValueError):
            SegmentationMap({"abc": ["ab", "d"]})

    def test_file_round_trip(self, tmp_path):
        path = tmp_path / "map.tsv"
        path.write_text("international\tinter nation al\nabc\tab c\n", encoding="utf-8")
        smap = read_segmentation_map(str(path))
        assert smap.get("international") == ("inter", "nation", "al")
        assert smap.get("abc") == ("ab", "c")
        assert "zz" not in smap

    def test_malformed_line_rejected(self, tmp_path):
        path = tmp_path / "map.tsv"
        path.write_text("no-tab-here\n", encoding="utf-8")
        with pytest.raises(ValueError):
            read_segmentation_map(str(path))
