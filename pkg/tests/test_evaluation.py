"""Tests for BLI, word-similarity evaluation and the report writers."""

import json

import numpy as np
import pytest

from clwe_runtime.crossmap import retrieval_scores
from clwe_runtime.errors import AllQueriesOov, EmptyTestSet, InsufficientCoverage, ParseError
from clwe_runtime.evaluation import (
    bli_evaluate, read_word_similarity, word_similarity_eval, write_bli_table, write_report_json,
)
from models import BilingualDictionary, EmbeddingMatrix, Vocabulary
from schemas import BliReport, RunReport
from tests_helper import best_rank_oracle, hand_spearman, word_space


X2 = np.array([[1.0, 0.0], [1.0, 0.2]])
Y2 = np.array([[1.0, 0.0], [0.0, 1.0]])
I2 = np.eye(2)


class TestBli:
    def test_ranks_one_and_two(self):
        report = bli_evaluate(I2, X2, Y2, BilingualDictionary([0, 1], [0, 1]), retrieval="cosine")
        assert report.ranks == [1, 2]
        assert report.mrr == pytest.approx(0.75)
        assert report.p_at_1 == pytest.approx(0.5)

    def test_best_gold_target_counts(self):
        report = bli_evaluate(I2, X2, Y2, BilingualDictionary([1, 1], [1, 0]), retrieval="cosine")
        assert report.ranks == [1]

    def test_ties_ordered_by_target_id(self):
        Y = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        X = np.array([[1.0, 0.0], [1.0, 0.0]])
        report = bli_evaluate(I2, X, Y, BilingualDictionary([0, 1], [0, 1]), retrieval="cosine")
        assert report.ranks == [1, 2]

    @pytest.mark.parametrize("retrieval", ["cosine", "csls"])
    def test_ranks_match_sorting_oracle(self, rng, retrieval):
        X, Y = rng.normal(size=(30, 4)), rng.normal(size=(25, 4))
        W = np.linalg.qr(rng.normal(size=(4, 4)))[0]
        gold = {q: sorted(set(rng.integers(0, 25, size=2).tolist())) for q in range(0, 30, 3)}
        pairs = [(q, t) for q, ts in gold.items() for t in ts]
        report = bli_evaluate(W, X, Y, BilingualDictionary.from_pairs(pairs), retrieval=retrieval, csls_k=4)
        scores = retrieval_scores(X @ W, Y, np.array(sorted(gold)), method=retrieval, k=4)
        expected = [best_rank_oracle(row, gold[q]) for row, q in zip(scores, sorted(gold))]
        assert report.ranks == expected
        assert report.query_ids == sorted(gold)

    def test_out_of_vocabulary_queries_counted(self):
        report = bli_evaluate(I2, X2, Y2, BilingualDictionary([0, 5], [0, 0]), retrieval="cosine")
        assert report.oov_count == 1
        assert report.evaluated == 1

    def test_all_queries_oov(self):
        with pytest.raises(AllQueriesOov):
            bli_evaluate(I2, X2, Y2, BilingualDictionary([7], [0]), retrieval="cosine")

    def test_empty_dictionary(self):
        with pytest.raises(EmptyTestSet):
            bli_evaluate(I2, X2, Y2, BilingualDictionary([], []))

    def test_candidate_cutoff_hides_targets(self):
        report = bli_evaluate(
            I2, X2, Y2, BilingualDictionary([0, 1], [0, 1]), retrieval="cosine", candidate_cutoff=1
        )
        assert report.oov_count == 1
        assert report.ranks == [1]

    def test_csls_k_clamped(self):
        report = bli_evaluate(I2, X2, Y2, BilingualDictionary([0], [0]), retrieval="csls", csls_k=10)
        assert report.csls_k == 1

    def test_word_pairs(self):
        X, Y = word_space("s", X2), word_space("t", Y2)
        report = bli_evaluate(I2, X, Y, [("s0", "t0"), ("s1", "t1"), ("s9", "t0")], retrieval="cosine")
        assert report.ranks == [1, 2]
        assert report.oov_count == 1

    def test_word_pairs_need_vocabularies(self):
        with pytest.raises(TypeError):
            bli_evaluate(I2, X2, Y2, [("a", "b")])

    def test_p_at_1_cannot_exceed_mrr(self):
        with pytest.raises(ValueError):
            BliReport(mrr=0.2, p_at_1=0.5)


class TestWordSimilarity:
    def _emb(self):
        vocab = Vocabulary.from_ranked_words(["a", "b", "c", "d"])
        M = np.array([[1.0, 0.0], [0.9, 0.1], [0.0, 1.0], [-1.0, 0.2]])
        return EmbeddingMatrix(vocab, M)

    def test_matches_hand_spearman_with_ties(self):
        emb = self._emb()
        pairs = [("a", "b", 9.0), ("a", "c", 3.0), ("a", "d", 3.0), ("b", "c", 1.0)]
        report = word_similarity_eval(emb, pairs)
        cos = [
            float(emb.vector(w1) @ emb.vector(w2) / np.linalg.norm(emb.vector(w1)) / np.linalg.norm(emb.vector(w2)))
            for w1, w2, _ in pairs
        ]
        assert report.spearman_rho == pytest.approx(hand_spearman(cos, [s for *_, s in pairs]))
        assert report.pair_coverage == 1.0

    def test_perfect_and_inverted_order(self):
        emb = self._emb()
        pairs = [("a", "b", 3.0), ("a", "c", 2.0), ("a", "d", 1.0)]
        assert word_similarity_eval(emb, pairs).spearman_rho == pytest.approx(1.0)
        inverted = [(w1, w2, -s) for w1, w2, s in pairs]
        assert word_similarity_eval(emb, inverted).spearman_rho == pytest.approx(-1.0)

    def test_coverage_reported(self):
        pairs = [("a", "b", 3.0), ("a", "c", 2.0), ("a", "zzz", 1.0), ("x", "y", 1.0)]
        report = word_similarity_eval(self._emb(), pairs)
        assert report.covered_pairs == 2
        assert report.pair_coverage == pytest.approx(0.5)

    def test_insufficient_coverage(self):
        with pytest.raises(InsufficientCoverage):
            word_similarity_eval(self._emb(), [("a", "b", 1.0), ("x", "y", 2.0)])

    def test_read_file(self, tmp_path):
        path = tmp_path / "ws.tsv"
        path.write_text("# header\nA\tB\t7.5\n\nc\td\t1\n", encoding="utf-8")
        assert read_word_similarity(path) == [("a", "b", 7.5), ("c", "d", 1.0)]

    def test_read_bad_score(self, tmp_path):
        path = tmp_path / "ws.tsv"
        path.write_text("a\tb\thigh\n", encoding="utf-8")
        with pytest.raises(ParseError):
            read_word_similarity(path)


class TestWriters:
    def test_bli_table(self, tmp_path):
        good = BliReport(mrr=0.75, p_at_1=0.5)
        rows = {"baseline": {"src->trg": good}, "augmented": {"src->trg": good, "trg->src": good}}
        lines = write_bli_table(rows, tmp_path / "t.tsv").read_text(encoding="utf-8").splitlines()
        assert [c.strip() for c in lines[0].split("\t")] == [
            "label", "src->trg MRR", "src->trg P@1", "trg->src MRR", "trg->src P@1",
        ]
        assert [c.strip() for c in lines[1].split("\t")] == ["baseline", "0.750", "0.500", "-", "-"]

    def test_report_json_without_timings(self, tmp_path):
        report = RunReport(plan="none", seed=3, timings={"embed": 1.5})
        path = write_report_json(report, tmp_path / "r.json")
        assert json.loads(path.read_text(encoding="utf-8"))["timings"] == {"embed": 1.5}
        assert "timings" not in json.loads(report.to_json(include_timings=False))
