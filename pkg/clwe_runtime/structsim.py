"""
Structural similarity of two embedding spaces.

kNN graphs over the most frequent words, their Laplacian spectra, and the
eigenvector similarity metric: the sum of squared differences between the
top-k Laplacian eigenvalues of the two graphs (lower is more similar).
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Literal, Tuple, Union

import numpy as np
from scipy.linalg import LinAlgError, eigvalsh

from clwe_runtime.errors import InvalidK, SolverError, ZeroVector
from models import EmbeddingMatrix
from schemas import EigsimReport

logger = logging.getLogger(__name__)

PSD_TOLERANCE = 1e-9

Embeddings = Union[EmbeddingMatrix, np.ndarray]


@dataclass
class NeighborGraph:
    adjacency: np.ndarray
    k: int

    @property
    def n(self) -> int:
        return int(self.adjacency.shape[0])

    @property
    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    def laplacian(self) -> np.ndarray:
        A = self.adjacency.astype(np.float64)
        return np.diag(A.sum(axis=1)) - A


@dataclass
class SpectralSummary:
    eigenvalues: np.ndarray
    k: int
    mass_fraction: float


def _matrix(emb: Embeddings) -> np.ndarray:
    return emb.matrix if isinstance(emb, EmbeddingMatrix) else np.asarray(emb, dtype=np.float64)


def knn_graph(emb: Embeddings, top_m: int, k: int) -> NeighborGraph:
    """Binary kNN graph over the top_m rows, symmetrized by union.

    Self edges are excluded; equal similarities prefer the lower id.
    """
    M = _matrix(emb)
    if top_m > M.shape[0] or top_m < 2:
        raise InvalidK(f"top_m={top_m} must be in [2, {M.shape[0]}]")
    if not 1 <= k < top_m:
        raise InvalidK(f"k={k} must satisfy 1 <= k < top_m={top_m}")

    head = M[:top_m]
    norms = np.linalg.norm(head, axis=1)
    if np.any(norms == 0):
        raise ZeroVector("kNN graph over zero vectors")
    head = head / norms[:, None]
    sims = head @ head.T
    np.fill_diagonal(sims, -np.inf)
    neighbors = np.argsort(-sims, axis=1, kind="stable")[:, :k]

    A = np.zeros((top_m, top_m), dtype=np.int8)
    rows = np.repeat(np.arange(top_m), k)
    A[rows, neighbors.ravel()] = 1
    A = np.maximum(A, A.T)
    return NeighborGraph(adjacency=A, k=k)


def select_k(
    eigenvalues: np.ndarray,
    threshold: float = 0.9,
    rule: Literal["cumulative_ge", "strict_below"] = "cumulative_ge",
) -> Tuple[int, float]:
    """Choose how many of the (descending) eigenvalues to compare.

    cumulative_ge: smallest k whose top-k sum reaches threshold of the total.
    strict_below: largest k whose top-k sum is still below it (at least 1).
    Returns (k, mass fraction at k).
    """
    total = float(np.sum(eigenvalues))
    if total <= 0:
        return 1, 1.0
    cum = np.cumsum(eigenvalues) / total
    if rule == "cumulative_ge":
        k = int(np.argmax(cum >= threshold)) + 1
    elif rule == "strict_below":
        below = np.nonzero(cum < threshold)[0]
        k = int(below[-1]) + 1 if below.size else 1
    else:
        raise ValueError(f"unknown k rule '{rule}'")
    return k, float(cum[k - 1])


def laplacian_spectrum(
    g: NeighborGraph,
    threshold: float = 0.9,
    rule: Literal["cumulative_ge", "strict_below"] = "cumulative_ge",
) -> SpectralSummary:
    try:
        values = eigvalsh(g.laplacian())
    except (LinAlgError, ValueError) as e:
        raise SolverError(f"Laplacian eigensolver failed: {e}") from e
    values = np.sort(values)[::-1].copy()
    if values.size and values[-1] < -PSD_TOLERANCE:
        raise SolverError(f"Laplacian eigenvalue {values[-1]} is negative beyond tolerance")
    values[(values < 0) & (values >= -PSD_TOLERANCE)] = 0.0
    k, mass = select_k(values, threshold, rule)
    return SpectralSummary(eigenvalues=values, k=k, mass_fraction=mass)


def _spectrum_of(emb: Embeddings, top_m: int, k_nn: int, threshold: float, rule: str) -> SpectralSummary:
    return laplacian_spectrum(knn_graph(emb, top_m, k_nn), threshold, rule)


def eigenvector_similarity_report(
    emb_x: Embeddings,
    emb_y: Embeddings,
    top_m: int = 1000,
    k_nn: int = 10,
    threshold: float = 0.9,
    rule: Literal["cumulative_ge", "strict_below"] = "cumulative_ge",
    combine: Literal["min", "max"] = "min",
) -> EigsimReport:
    with ThreadPoolExecutor(max_workers=2) as pool:
        fut_x = pool.submit(_spectrum_of, emb_x, top_m, k_nn, threshold, rule)
        fut_y = pool.submit(_spectrum_of, emb_y, top_m, k_nn, threshold, rule)
        spec_x, spec_y = fut_x.result(), fut_y.result()

    k = min(spec_x.k, spec_y.k) if combine == "min" else max(spec_x.k, spec_y.k)
    diff = spec_x.eigenvalues[:k] - spec_y.eigenvalues[:k]
    value = float(np.sum(diff * diff))
    logger.debug(f"eigsim: k_x={spec_x.k}, k_y={spec_y.k}, k={k}, value={value:.4f}")
    return EigsimReport(
        eig_sim=value,
        k_used=k,
        k_x=spec_x.k,
        k_y=spec_y.k,
        lambda_top_x=spec_x.eigenvalues[:k].tolist(),
        lambda_top_y=spec_y.eigenvalues[:k].tolist(),
        threshold=threshold,
        rule=rule,
    )


def eigenvector_similarity(
    emb_x: Embeddings,
    emb_y: Embeddings,
    top_m: int = 1000,
    k_nn: int = 10,
    threshold: float = 0.9,
    rule: Literal["cumulative_ge", "strict_below"] = "cumulative_ge",
    combine: Literal["min", "max"] = "min",
) -> float:
    return eigenvector_similarity_report(emb_x, emb_y, top_m, k_nn, threshold, rule, combine).eig_sim
