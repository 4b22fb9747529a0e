"""Tests for corpus normalization, vocabulary construction, statistics and I/O."""

import numpy as np
import pytest

from clwe_runtime.corpus import (
    build_vocabulary, concat_corpora, corpus_statistics, normalize_text, read_corpus,
    read_word_pairs, repeat_corpus, sample_sentences, split_corpus, tokenize_file,
    type_token_ratio, write_corpus, write_word_pairs,
)
from clwe_runtime.errors import EmptyCorpus, EmptyVocabulary, LanguageMismatch, ParseError
from models import BilingualDictionary, Corpus, Vocabulary
from tests_helper import toy_corpus


class TestNormalize:
    def test_lowercases_and_splits_punctuation(self):
        assert normalize_text("Hello, World!") == ["hello", ",", "world", "!"]

    def test_keeps_case_when_asked(self):
        assert normalize_text("Hello World", lowercase=False) == ["Hello", "World"]

    def test_blank_line_has_no_tokens(self):
        assert normalize_text("   \t ") == []

    def test_corpus_drops_empty_tokens_and_sentences(self):
        corpus = Corpus.from_sentences([["a", "", "b"], [], [""]], "src")
        assert corpus.sentences == (("a", "b"),)


class TestVocabulary:
    def test_ids_follow_descending_frequency_then_lexicographic(self):
        corpus = toy_corpus(["b a c", "b a", "b d"])
        vocab = build_vocabulary(corpus)
        assert vocab.words == ["b", "a", "c", "d"]
        assert vocab.counts.tolist() == [3, 2, 1, 1]
        assert vocab["b"] == 0

    def test_ties_are_lexicographic_not_first_seen(self):
        vocab = build_vocabulary(toy_corpus(["zeta beta", "alpha beta zeta alpha"]))
        assert vocab.words == ["alpha", "beta", "zeta"]

    def test_min_count_filters(self):
        vocab = build_vocabulary(toy_corpus(["a a b"]), min_count=2)
        assert vocab.words == ["a"]

    def test_min_count_excluding_everything_raises(self):
        with pytest.raises(EmptyVocabulary):
            build_vocabulary(toy_corpus(["a b"]), min_count=5)

    def test_min_count_must_be_positive(self):
        with pytest.raises(ValueError):
            build_vocabulary(toy_corpus(["a"]), min_count=0)

    def test_encode_drops_unknown_tokens(self):
        vocab = build_vocabulary(toy_corpus(["a b"]))
        assert vocab.encode(["a", "zzz", "b"]) == [vocab["a"], vocab["b"]]

    def test_duplicate_words_rejected(self):
        with pytest.raises(ValueError):
            Vocabulary(["a", "a"], [1, 1])


class TestStatistics:
    def test_type_token_ratio(self):
        assert type_token_ratio(toy_corpus(["a b a", "c"])) == pytest.approx(3 / 4)

    def test_ttr_of_empty_corpus_raises(self):
        with pytest.raises(EmptyCorpus):
            type_token_ratio(Corpus((), "src"))

    def test_statistics_report(self):
        stats = corpus_statistics(toy_corpus(["a b a", "c"]))
        assert stats.sentences == 2
        assert stats.tokens == 4
        assert stats.types == 3
        assert stats.mean_sentence_length == pytest.approx(2.0)


class TestCombining:
    def test_concat_preserves_order(self):
        joined = concat_corpora(toy_corpus(["a"]), toy_corpus(["b"]))
        assert joined.sentences == (("a",), ("b",))

    def test_concat_rejects_language_mismatch(self):
        with pytest.raises(LanguageMismatch):
            concat_corpora(toy_corpus(["a"], "src"), toy_corpus(["b"], "trg"))

    def test_repeat(self):
        assert len(repeat_corpus(toy_corpus(["a", "b"]), 3)) == 6

    def test_split_gives_remainder_to_earlier_parts(self):
        parts = split_corpus(toy_corpus(["a", "b", "c", "d", "e"]), 2)
        assert [len(p) for p in parts] == [3, 2]
        assert parts[0].sentences + parts[1].sentences == toy_corpus(["a", "b", "c", "d", "e"]).sentences

    def test_sample_without_replacement(self):
        corpus = toy_corpus([f"w{i}" for i in range(10)])
        sample, idx = sample_sentences(corpus, 4, np.random.default_rng(0))
        assert len(set(idx.tolist())) == 4
        assert [s[0] for s in sample] == [f"w{i}" for i in idx]

    def test_sample_too_many_raises(self):
        with pytest.raises(ValueError):
            sample_sentences(toy_corpus(["a"]), 2, np.random.default_rng(0))


class TestFiles:
    def test_corpus_file_round_trip(self, tmp_path):
        corpus = toy_corpus(["a b", "c"])
        path = write_corpus(corpus, tmp_path / "c.txt")
        assert read_corpus(path, "src").sentences == corpus.sentences

    def test_tokenize_file(self, tmp_path):
        raw = tmp_path / "raw.txt"
        raw.write_text("Hello, World!\n\nBye.\n", encoding="utf-8")
        n = tokenize_file(raw, tmp_path / "tok.txt")
        assert n == 2
        assert (tmp_path / "tok.txt").read_text(encoding="utf-8") == "hello , world !\nbye .\n"

    def test_word_pairs_round_trip(self, tmp_path):
        path = write_word_pairs([("a", "x"), ("b", "y")], tmp_path / "d.tsv")
        assert read_word_pairs(path) == [("a", "x"), ("b", "y")]

    def test_malformed_dictionary_line_reports_line_number(self, tmp_path):
        path = tmp_path / "d.tsv"
        path.write_text("a\tx\nbroken\n", encoding="utf-8")
        with pytest.raises(ParseError) as exc:
            read_word_pairs(path)
        assert exc.value.line == 2


class TestBilingualDictionary:
    def test_duplicates_dropped_keeping_first(self):
        d = BilingualDictionary([0, 0, 1], [2, 2, 3])
        assert d.pairs() == [(0, 2), (1, 3)]

    def test_from_word_pairs_skips_oov(self):
        src = Vocabulary.from_ranked_words(["a", "b"])
        trg = Vocabulary.from_ranked_words(["x", "y"])
        d, skipped = BilingualDictionary.from_word_pairs([("a", "y"), ("c", "x")], src, trg)
        assert d.pairs() == [(0, 1)]
        assert skipped == 1

    def test_grouped_and_inverted(self):
        d = BilingualDictionary([0, 0, 1], [1, 2, 2])
        assert d.grouped() == {0: [1, 2], 1: [2]}
        assert d.inverted().pairs() == [(1, 0), (2, 0), (2, 1)]
