"""Tests for corpus BLEU."""

import math

import pytest

from clwe_runtime.bleu import corpus_bleu
from clwe_runtime.errors import EmptyTestSet, LengthMismatch
from tests_helper import toy_corpus


def _split(*lines):
    return [line.split() for line in lines]


class TestBleu:
    def test_identical_output_scores_one(self):
        refs = _split("the cat sat on the mat", "a dog ran home today")
        report = corpus_bleu(refs, refs)
        assert report.score == pytest.approx(1.0)
        assert report.brevity_penalty == 1.0
        assert not report.smoothed

    def test_no_overlap_scores_zero(self):
        report = corpus_bleu(_split("a b c d"), _split("w x y z"))
        assert report.score == 0.0
        assert report.smoothed
        assert report.smoothed_score > 0.0

    def test_clipped_bigram_by_hand(self):
        report = corpus_bleu(_split("the the the cat"), _split("the cat sat down"), max_n=2)
        assert report.precisions == pytest.approx([0.5, 1 / 3])
        assert report.score == pytest.approx(math.sqrt(1 / 6))

    def test_brevity_penalty(self):
        report = corpus_bleu(_split("a b"), _split("a b c d"), max_n=1)
        assert report.brevity_penalty == pytest.approx(math.exp(-1.0))
        assert report.score == pytest.approx(math.exp(-1.0))

    def test_longer_hypothesis_not_penalized(self):
        report = corpus_bleu(_split("a b c d e"), _split("a b c"), max_n=1)
        assert report.brevity_penalty == 1.0
        assert report.score == pytest.approx(0.6)

    def test_smoothing_floors_zero_precisions(self):
        report = corpus_bleu(_split("a b c"), _split("a b d"), max_n=3)
        assert report.score == 0.0
        assert report.smoothed_score == pytest.approx((2 / 3 * 1 / 2 * 0.1) ** (1 / 3))

    def test_statistics_pool_over_corpus(self):
        report = corpus_bleu(_split("a b", "c d"), _split("a b", "c e"), max_n=1)
        assert report.precisions == [0.75]
        assert report.hyp_length == 4
        assert report.ref_length == 4

    def test_accepts_corpora(self):
        hyp = toy_corpus(["a b c d"], "trg")
        assert corpus_bleu(hyp, hyp).score == pytest.approx(1.0)

    def test_empty_hypotheses(self):
        report = corpus_bleu([[]], _split("a b"))
        assert report.score == 0.0
        assert report.brevity_penalty == 0.0


class TestBleuErrors:
    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            corpus_bleu(_split("a"), _split("a", "b"))

    def test_empty_test_set(self):
        with pytest.raises(EmptyTestSet):
            corpus_bleu([], [])

    def test_max_n(self):
        with pytest.raises(ValueError):
            corpus_bleu(_split("a"), _split("a"), max_n=0)
