"""Tests for kNN graphs, Laplacian spectra and eigenvector similarity."""

import numpy as np
import pytest

from clwe_runtime.errors import InvalidK, ZeroVector
from clwe_runtime.structsim import (
    NeighborGraph, eigenvector_similarity, eigenvector_similarity_report, knn_graph,
    laplacian_spectrum, select_k,
)


def _angles(*degrees):
    rad = np.deg2rad(degrees)
    return np.stack([np.cos(rad), np.sin(rad)], axis=1)


class TestGraph:
    def test_complete_graph_when_k_is_all_others(self, rng):
        g = knn_graph(rng.normal(size=(10, 4)), top_m=6, k=5)
        expected = np.ones((6, 6), dtype=np.int8) - np.eye(6, dtype=np.int8)
        assert np.array_equal(g.adjacency, expected)

    def test_symmetric_without_self_loops(self, rng):
        g = knn_graph(rng.normal(size=(30, 5)), top_m=30, k=3)
        assert np.array_equal(g.adjacency, g.adjacency.T)
        assert not np.any(np.diag(g.adjacency))
        assert np.all(g.degrees >= 3)

    def test_path_from_angles(self):
        g = knn_graph(_angles(0, 40, 100), top_m=3, k=1)
        assert g.adjacency.tolist() == [[0, 1, 0], [1, 0, 1], [0, 1, 0]]

    def test_invalid_k(self, rng):
        X = rng.normal(size=(10, 3))
        with pytest.raises(InvalidK):
            knn_graph(X, top_m=5, k=5)
        with pytest.raises(InvalidK):
            knn_graph(X, top_m=11, k=2)

    def test_zero_vector(self):
        with pytest.raises(ZeroVector):
            knn_graph(np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 1.0]]), top_m=3, k=1)


class TestSpectrum:
    def test_complete_graph_spectrum(self):
        A = np.ones((5, 5), dtype=np.int8) - np.eye(5, dtype=np.int8)
        spec = laplacian_spectrum(NeighborGraph(A, k=4))
        assert spec.eigenvalues == pytest.approx([5, 5, 5, 5, 0], abs=1e-9)

    def test_path_spectrum(self):
        spec = laplacian_spectrum(knn_graph(_angles(0, 40, 100), top_m=3, k=1))
        assert spec.eigenvalues == pytest.approx([3, 1, 0], abs=1e-9)

    @pytest.mark.parametrize("k", [1, 3, 6])
    def test_eigenvalues_sum_to_trace(self, rng, k):
        g = knn_graph(rng.normal(size=(45, 7)), top_m=45, k=k)
        spec = laplacian_spectrum(g)
        assert float(np.sum(spec.eigenvalues)) == pytest.approx(float(np.trace(g.laplacian())), abs=1e-8)
        assert float(np.trace(g.laplacian())) == pytest.approx(float(np.sum(g.degrees)))

    def test_eigenvalues_non_negative_and_descending(self, rng):
        spec = laplacian_spectrum(knn_graph(rng.normal(size=(40, 6)), top_m=40, k=4))
        assert np.all(spec.eigenvalues >= 0)
        assert np.all(np.diff(spec.eigenvalues) <= 1e-12)


class TestSelectK:
    def test_cumulative_rule(self):
        assert select_k(np.array([5.0, 3.0, 2.0]), threshold=0.75)[0] == 2

    def test_strict_below_rule(self):
        k, mass = select_k(np.array([5.0, 3.0, 2.0]), threshold=0.75, rule="strict_below")
        assert k == 1
        assert mass == pytest.approx(0.5)

    def test_all_zero_spectrum(self):
        assert select_k(np.zeros(4)) == (1, 1.0)

    def test_unknown_rule(self):
        with pytest.raises(ValueError):
            select_k(np.array([1.0]), rule="median")


class TestEigsim:
    def test_identical_spaces_score_zero(self, rng):
        X = rng.normal(size=(50, 6))
        assert eigenvector_similarity(X, X, top_m=50, k_nn=5) == 0.0

    def test_rotation_invariant(self, rotation):
        X, Y, _ = rotation
        assert eigenvector_similarity(X, Y, top_m=60, k_nn=5) == pytest.approx(0.0, abs=1e-9)

    @pytest.mark.parametrize("seed", range(5))
    def test_row_permutation_scores_zero(self, seed):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(60, 8))
        P = X[rng.permutation(60)]
        assert eigenvector_similarity(X, P, top_m=60, k_nn=5) == pytest.approx(0.0, abs=1e-9)

    def test_symmetric(self, rng):
        X, Y = rng.normal(size=(50, 6)), rng.normal(size=(50, 6))
        forward = eigenvector_similarity(X, Y, top_m=50, k_nn=4)
        backward = eigenvector_similarity(Y, X, top_m=50, k_nn=4)
        assert forward == pytest.approx(backward)
        assert forward >= 0

    def test_report_records_k(self, rng):
        X, Y = rng.normal(size=(40, 5)), rng.normal(size=(40, 5))
        report = eigenvector_similarity_report(X, Y, top_m=40, k_nn=3, combine="max")
        assert report.k_used == max(report.k_x, report.k_y)
        assert len(report.lambda_top_x) == report.k_used
        assert report.eig_sim == pytest.approx(
            sum((a - b) ** 2 for a, b in zip(report.lambda_top_x, report.lambda_top_y))
        )
