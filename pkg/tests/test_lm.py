"""Tests for the Kneser-Ney n-gram model and ARPA I/O."""

import math

import numpy as np
import pytest

from clwe_runtime import lm as lm_module
from clwe_runtime.errors import EmptyCorpus, NoSmoothingZeroProb, ParseError
from clwe_runtime.lm import (
    BOS, EOS, PROB_CACHE_SIZE, UNK, BackoffLM, NGramLM, UniformLM, load_arpa, lm_logprob, next_state,
    train_ngram_lm, write_arpa,
)
from models import Corpus
from tests_helper import toy_corpus


def _sample_corpus():
    return toy_corpus(["a b c", "a c", "b a c d", "c d a", "a b"])


class TestCounts:
    def test_no_discount_follows_raw_counts(self):
        lm = train_ngram_lm(toy_corpus(["a b"]), order=2, discount=0.0)
        assert lm.prob("b", ["a"]) == pytest.approx(1.0)
        assert lm.prob(EOS, ["b"]) == pytest.approx(1.0)

    def test_hand_computed_kneser_ney(self):
        lm = train_ngram_lm(toy_corpus(["a b", "a c"]), order=2, discount=0.5)
        # continuation counts a:1 b:1 c:1 </s>:2 over 5 predictable words
        assert lm.prob("b") == pytest.approx(0.18)
        assert lm.prob("b", ["a"]) == pytest.approx(0.34)

    def test_unknown_word_scores_as_unk(self):
        lm = train_ngram_lm(_sample_corpus(), order=3)
        assert lm.prob("zzz", ["a"]) == pytest.approx(lm.prob(UNK, ["a"]))
        assert lm.prob(UNK, ["a"]) > 0

    def test_vocabulary(self):
        lm = train_ngram_lm(toy_corpus(["a b"]), order=2)
        assert lm.vocabulary == frozenset({"a", "b", EOS, UNK})


class TestNormalization:
    @pytest.mark.parametrize("context", [(), (BOS,), ("a",), ("c", "d"), ("zzz",), ("a", "zzz")])
    def test_distribution_sums_to_one(self, context):
        lm = train_ngram_lm(_sample_corpus(), order=3, discount=0.75)
        total = sum(lm.prob(w, context) for w in lm.vocabulary)
        assert total == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("order", [2, 3, 4])
    def test_sampled_stored_contexts_sum_to_one(self, order):
        rng = np.random.default_rng(order)
        words = [f"w{i}" for i in range(25)]
        lines = [" ".join(rng.choice(words, size=int(rng.integers(2, 9)))) for _ in range(150)]
        lm = train_ngram_lm(toy_corpus(lines), order=order, discount=0.75)
        stored = sorted({h for m in range(1, order + 1) for h in lm.contexts[m]})
        picks = rng.choice(len(stored), size=min(100, len(stored)), replace=False)
        vocabulary = sorted(lm.vocabulary)
        for i in picks:
            context = stored[int(i)]
            total = sum(lm.prob(w, context) for w in vocabulary)
            assert total == pytest.approx(1.0, abs=1e-9), context

    def test_sentence_order_does_not_matter(self):
        corpus = _sample_corpus()
        shuffled = Corpus(corpus.sentences[::-1], corpus.language_tag)
        a = train_ngram_lm(corpus, order=3)
        b = train_ngram_lm(shuffled, order=3)
        for sentence in corpus:
            assert lm_logprob(a, sentence) == pytest.approx(lm_logprob(b, sentence))


class TestScoring:
    def test_sentence_logprob_adds_eos(self):
        lm = train_ngram_lm(toy_corpus(["a b"]), order=2, discount=0.0)
        assert lm_logprob(lm, ["a", "b"]) == pytest.approx(0.0)

    def test_zero_probability_raises(self):
        lm = BackoffLM(1, {("a",): math.log10(0.5), (EOS,): math.log10(0.5)}, {})
        with pytest.raises(NoSmoothingZeroProb):
            lm_logprob(lm, ["b"])

    def test_uniform(self):
        lm = UniformLM(["a", "b"])
        assert lm.logprob("a") == pytest.approx(-math.log(4))

    def test_next_state_keeps_order_minus_one(self):
        assert next_state((BOS, "a"), "b", 3) == ("a", "b")
        assert next_state((), "a", 1) == ()

    def test_empty_corpus(self):
        with pytest.raises(EmptyCorpus):
            train_ngram_lm(Corpus((), "src"))


class TestArpa:
    def test_round_trip_reproduces_scores(self, tmp_path):
        lm = train_ngram_lm(_sample_corpus(), order=3)
        loaded = load_arpa(write_arpa(lm, tmp_path / "lm.arpa"))
        assert loaded.order == 3
        assert loaded.vocabulary == lm.vocabulary
        contexts = [(), (BOS,), ("a",), (BOS, "a"), ("a", "b"), ("d", "d"), ("zzz",)]
        for context in contexts:
            for w in sorted(lm.vocabulary) + ["zzz"]:
                assert loaded.logprob(w, context) == pytest.approx(lm.logprob(w, context), abs=1e-6)

    def test_header_counts(self, tmp_path):
        lm = train_ngram_lm(toy_corpus(["a b"]), order=2)
        text = write_arpa(lm, tmp_path / "lm.arpa").read_text(encoding="utf-8")
        assert text.startswith("\\data\\\nngram 1=5\n")
        assert text.rstrip().endswith("\\end\\")

    def test_count_mismatch(self, tmp_path):
        path = tmp_path / "bad.arpa"
        path.write_text("\\data\\\nngram 1=2\n\n\\1-grams:\n-0.3\ta\n\n\\end\\\n", encoding="utf-8")
        with pytest.raises(ParseError):
            load_arpa(path)

    def test_wrong_gram_length(self, tmp_path):
        path = tmp_path / "bad.arpa"
        path.write_text("\\data\\\nngram 1=1\n\n\\1-grams:\n-0.3\ta b\n\n\\end\\\n", encoding="utf-8")
        with pytest.raises(ParseError) as exc:
            load_arpa(path)
        assert exc.value.line == 5


class TestProbabilityCache:
    def test_cache_is_bounded(self):
        lm = train_ngram_lm(_sample_corpus(), order=3)
        lm.prob("c", ["a", "b"])
        info = lm._prob.cache_info()
        assert info.maxsize == PROB_CACHE_SIZE
        assert 0 < info.currsize <= PROB_CACHE_SIZE

    def test_small_cache_gives_same_scores(self, monkeypatch):
        full = train_ngram_lm(_sample_corpus(), order=3)
        monkeypatch.setattr(lm_module, "PROB_CACHE_SIZE", 4)
        small = NGramLM(3, full.discount).fit(_sample_corpus())
        for context in [(), (BOS,), ("a",), ("a", "b"), ("c", "d")]:
            for w in sorted(full.vocabulary):
                assert small.prob(w, context) == pytest.approx(full.prob(w, context))
        assert small._prob.cache_info().currsize <= 4

    def test_refit_drops_cached_scores(self):
        lm = train_ngram_lm(toy_corpus(["a b", "a c"]), order=2, discount=0.0)
        assert lm.prob("c", ["a"]) == pytest.approx(0.5)
        lm.fit(toy_corpus(["a c"]))
        assert lm.prob("c", ["a"]) == pytest.approx(1.0)
