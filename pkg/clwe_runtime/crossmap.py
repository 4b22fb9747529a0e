"""
Mapping-based cross-lingual embeddings.

Row-vector convention throughout: a source row x maps to x @ W, and the
mapping objective is sum_i w_i * ||x_i W - y_i||^2 over dictionary pairs.

Pipeline of one unsupervised run:
    normalize_for_mapping -> similarity_distribution_seed -> self_learn
where self_learn alternates solve_mapping and induce_dictionary.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Literal, Optional, Tuple

import numpy as np
from scipy.linalg import LinAlgError, orthogonal_procrustes

from clwe_runtime.config import MappingConfig, SelfLearnConfig
from clwe_runtime.corpus import read_word_pairs, write_word_pairs
from clwe_runtime.embed import load_matrix, save_matrix
from clwe_runtime.errors import (
    CutoffTooLarge,
    EmptyDictionary,
    KTooLarge,
    RankDeficient,
    SolverError,
    ZeroVector,
)
from models import BilingualDictionary, EmbeddingMatrix, MappingResult, Vocabulary

logger = logging.getLogger(__name__)

_CHUNK = 1024


# ---------------------------------------------------------------------------
# Normalization
# ---------------------------------------------------------------------------

def _unit_rows(M: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(M, axis=1)
    if np.any(norms == 0):
        raise ZeroVector(f"{int(np.sum(norms == 0))} zero rows cannot be length-normalized")
    return M / norms[:, None]


def normalize_matrix(M: np.ndarray) -> np.ndarray:
    """Unit rows, mean-centered columns, unit rows."""
    M = _unit_rows(np.asarray(M, dtype=np.float64))
    M = M - M.mean(axis=0, keepdims=True)
    return _unit_rows(M)


def normalize_for_mapping(emb: EmbeddingMatrix) -> EmbeddingMatrix:
    return emb.with_matrix(normalize_matrix(emb.matrix))


# ---------------------------------------------------------------------------
# Retrieval
# ---------------------------------------------------------------------------

def topk_mean(sims: np.ndarray, k: int) -> np.ndarray:
    """Mean of the k largest values of each row."""
    if k >= sims.shape[1]:
        return sims.mean(axis=1)
    part = np.partition(sims, sims.shape[1] - k, axis=1)[:, -k:]
    return part.mean(axis=1)


def _check_k(k: int, n_src: int, n_trg: int) -> None:
    if k < 1 or k >= n_trg or k > n_src:
        raise KTooLarge(f"csls k={k} needs 1 <= k < |Y|={n_trg} and k <= |X|={n_src}")


def _neighborhood_means(A: np.ndarray, B: np.ndarray, k: int) -> np.ndarray:
    """For each row of A, mean cosine to its k nearest rows of B (chunked)."""
    out = np.empty(A.shape[0])
    for start in range(0, A.shape[0], _CHUNK):
        out[start:start + _CHUNK] = topk_mean(A[start:start + _CHUNK] @ B.T, k)
    return out


def retrieval_scores(
    mapped_X: np.ndarray,
    Y: np.ndarray,
    query_ids: np.ndarray,
    method: Literal["cosine", "csls"] = "csls",
    k: int = 10,
) -> np.ndarray:
    """Score rows (len(query_ids), |Y|) of cosine or CSLS similarity.

    CSLS(x, y) = 2 cos(x, y) - r_Y(x) - r_X(y) with r_X computed over every
    mapped source row.
    """
    Xn = _unit_rows(np.asarray(mapped_X, dtype=np.float64))
    Yn = _unit_rows(np.asarray(Y, dtype=np.float64))
    q = np.asarray(query_ids, dtype=np.int64)
    sims = Xn[q] @ Yn.T
    if method == "cosine":
        return sims
    _check_k(k, Xn.shape[0], Yn.shape[0])
    r_y = topk_mean(sims, k)
    r_x = _neighborhood_means(Yn, Xn, k)
    return 2.0 * sims - r_y[:, None] - r_x[None, :]


def rank_targets(scores: np.ndarray, n_best: Optional[int] = None) -> np.ndarray:
    """Target ids by descending score; equal scores keep the lower id first."""
    order = np.argsort(-scores, axis=1, kind="stable")
    return order if n_best is None else order[:, :n_best]


def csls_retrieve(
    mapped_X: np.ndarray,
    Y: np.ndarray,
    query_ids: np.ndarray,
    k: int = 10,
    n_best: int = 1,
) -> np.ndarray:
    scores = retrieval_scores(mapped_X, Y, query_ids, method="csls", k=k)
    return rank_targets(scores, n_best)


# ---------------------------------------------------------------------------
# Seed induction
# ---------------------------------------------------------------------------

def _signatures(M: np.ndarray, cutoff: int) -> np.ndarray:
    head = M[:cutoff]
    sims = head @ head.T
    return -np.sort(-sims, axis=1)


def similarity_distribution_seed(
    X: np.ndarray,
    Y: np.ndarray,
    cutoff: int,
    normalize_signatures: bool = False,
) -> BilingualDictionary:
    """Pair each of the top-`cutoff` source words with the target word whose
    sorted intra-lingual similarity row is nearest.

    Default match is Euclidean distance between signatures; with
    normalize_signatures the signatures are unit/center/unit normalized and
    matched by dot product.
    """
    if cutoff < 1:
        raise ValueError(f"cutoff must be >= 1, got {cutoff}")
    if cutoff > X.shape[0] or cutoff > Y.shape[0]:
        raise CutoffTooLarge(f"cutoff {cutoff} exceeds vocabulary sizes {X.shape[0]}/{Y.shape[0]}")

    sig_x = _signatures(np.asarray(X, dtype=np.float64), cutoff)
    sig_y = _signatures(np.asarray(Y, dtype=np.float64), cutoff)

    matches = np.empty(cutoff, dtype=np.int64)
    if normalize_signatures:
        sig_x = normalize_matrix(sig_x)
        sig_y = normalize_matrix(sig_y)
        for start in range(0, cutoff, _CHUNK):
            matches[start:start + _CHUNK] = np.argmax(sig_x[start:start + _CHUNK] @ sig_y.T, axis=1)
    else:
        sq_y = np.einsum("ij,ij->i", sig_y, sig_y)
        for start in range(0, cutoff, _CHUNK):
            block = sig_x[start:start + _CHUNK]
            sq_x = np.einsum("ij,ij->i", block, block)
            dist = sq_x[:, None] + sq_y[None, :] - 2.0 * (block @ sig_y.T)
            matches[start:start + _CHUNK] = np.argmin(dist, axis=1)

    return BilingualDictionary(np.arange(cutoff), matches)


# ---------------------------------------------------------------------------
# Solving
# ---------------------------------------------------------------------------

def _dictionary_rows(
    X: np.ndarray, Y: np.ndarray, D: BilingualDictionary
) -> Tuple[np.ndarray, np.ndarray]:
    Xd, Yd = X[D.src_ids], Y[D.trg_ids]
    if D.weights is not None:
        root = np.sqrt(D.weights)[:, None]
        Xd, Yd = Xd * root, Yd * root
    return Xd, Yd


def solve_mapping(
    X: np.ndarray,
    Y: np.ndarray,
    D: BilingualDictionary,
    mode: Literal["orthogonal", "unconstrained"] = "orthogonal",
) -> np.ndarray:
    if len(D) == 0:
        raise EmptyDictionary("cannot solve a mapping from an empty dictionary")
    d = X.shape[1]
    if len(D) < d:
        logger.warning(f"Dictionary has {len(D)} pairs for dimension {d}; the mapping is underdetermined")
    Xd, Yd = _dictionary_rows(np.asarray(X, dtype=np.float64), np.asarray(Y, dtype=np.float64), D)

    try:
        if mode == "orthogonal":
            W, _ = orthogonal_procrustes(Xd, Yd)
            return W
        if mode == "unconstrained":
            if np.linalg.matrix_rank(Xd) < d:
                raise RankDeficient(f"dictionary rows span rank {np.linalg.matrix_rank(Xd)} < {d}")
            W, *_ = np.linalg.lstsq(Xd, Yd, rcond=None)
            return W
    except (LinAlgError, np.linalg.LinAlgError) as e:
        raise SolverError(f"{mode} solve failed: {e}") from e
    raise ValueError(f"unknown mapping mode '{mode}'")


def mapping_objective(W: np.ndarray, X: np.ndarray, Y: np.ndarray, D: BilingualDictionary) -> float:
    Xd, Yd = _dictionary_rows(X, Y, D)
    diff = Xd @ W - Yd
    return float(np.einsum("ij,ij->", diff, diff))


def mean_objective(W: np.ndarray, X: np.ndarray, Y: np.ndarray, D: BilingualDictionary) -> float:
    total_weight = float(D.weights.sum()) if D.weights is not None else float(len(D))
    return mapping_objective(W, X, Y, D) / max(total_weight, 1e-12)


# ---------------------------------------------------------------------------
# Self-learning
# ---------------------------------------------------------------------------

def _best_matches(scores: np.ndarray, keep_prob: float, rng: np.random.Generator) -> np.ndarray:
    if keep_prob < 1.0:
        scores = np.where(rng.random(scores.shape) < keep_prob, scores, -np.inf)
    return np.argmax(scores, axis=1)


def induce_dictionary(
    mapped_X: np.ndarray,
    Y: np.ndarray,
    cutoff: int,
    direction: Literal["forward", "backward", "union"] = "union",
    retrieval: Literal["cosine", "csls"] = "csls",
    csls_k: int = 10,
    keep_prob: float = 1.0,
    rng: Optional[np.random.Generator] = None,
) -> BilingualDictionary:
    """Nearest-neighbor dictionary between the top-`cutoff` words of each side.

    keep_prob < 1 drops each candidate pair independently before the
    argmax (stochastic dictionary induction).
    """
    rng = rng or np.random.default_rng(0)
    Xc = _unit_rows(mapped_X[: min(cutoff, mapped_X.shape[0])])
    Yc = _unit_rows(Y[: min(cutoff, Y.shape[0])])
    sims = Xc @ Yc.T
    if retrieval == "csls":
        _check_k(csls_k, Xc.shape[0], Yc.shape[0])
        _check_k(csls_k, Yc.shape[0], Xc.shape[0])
        r_y = topk_mean(sims, csls_k)
        r_x = topk_mean(sims.T, csls_k)
        sims = 2.0 * sims - r_y[:, None] - r_x[None, :]

    src, trg = [], []
    if direction in ("forward", "union"):
        fwd = _best_matches(sims, keep_prob, rng)
        src.append(np.arange(Xc.shape[0]))
        trg.append(fwd)
    if direction in ("backward", "union"):
        bwd = _best_matches(sims.T, keep_prob, rng)
        src.append(bwd)
        trg.append(np.arange(Yc.shape[0]))
    return BilingualDictionary(np.concatenate(src), np.concatenate(trg))


def _keep_probability(cfg: SelfLearnConfig, iteration: int) -> float:
    return min(1.0, (1.0 - cfg.dropout) * cfg.dropout_decay ** (iteration - 1))


def self_learn(
    X: np.ndarray,
    Y: np.ndarray,
    seed: BilingualDictionary,
    cfg: SelfLearnConfig,
) -> MappingResult:
    """Alternate solve_mapping and induce_dictionary until the mean objective
    stops improving by more than cfg.tolerance (relative) or max_iterations.

    Convergence and the best-objective choice only consider iterations run
    without dictionary dropout; the seed solution counts as one.
    """
    if len(seed) == 0:
        raise EmptyDictionary("self-learning needs a non-empty seed dictionary")
    rng = np.random.default_rng(cfg.rng_seed)

    W = solve_mapping(X, Y, seed, cfg.mode)
    objective = mean_objective(W, X, Y, seed)
    trace = [objective]
    best = (objective, W, seed)
    prev_clean: Optional[float] = objective
    converged = False
    iteration = 0

    cutoff = min(cfg.vocab_cutoff, X.shape[0], Y.shape[0])
    csls_k = cfg.csls_k
    if cfg.retrieval == "csls" and csls_k >= cutoff:
        csls_k = max(1, cutoff - 1)
        logger.warning(f"csls_k {cfg.csls_k} clamped to {csls_k} for induction cutoff {cutoff}")

    clean_seen = cfg.dropout == 0.0
    for iteration in range(1, cfg.max_iterations + 1):
        keep = _keep_probability(cfg, iteration)
        D = induce_dictionary(
            X @ W, Y, cutoff,
            direction=cfg.direction, retrieval=cfg.retrieval, csls_k=csls_k,
            keep_prob=keep, rng=rng,
        )
        W = solve_mapping(X, Y, D, cfg.mode)
        objective = mean_objective(W, X, Y, D)
        trace.append(objective)
        logger.debug(f"self-learning iteration {iteration}: keep={keep:.3f}, |D|={len(D)}, objective={objective:.6f}")

        if keep < 1.0:
            best = (objective, W, D)
            prev_clean = None
            continue

        if not clean_seen or objective < best[0]:
            best = (objective, W, D)
        clean_seen = True
        if prev_clean is not None and prev_clean - objective < cfg.tolerance * max(abs(prev_clean), 1e-12):
            converged = True
            break
        prev_clean = objective

    if not converged and cfg.max_iterations > 0:
        logger.info(f"Self-learning stopped after {iteration} iterations without converging")

    _, W_best, D_best = best
    return MappingResult(
        W=W_best,
        final_dictionary=D_best,
        objective_trace=trace,
        converged=converged,
        iterations=iteration,
        mode=cfg.mode,
    )


def unsupervised_map(X: np.ndarray, Y: np.ndarray, cfg: MappingConfig) -> MappingResult:
    """Seed from similarity distributions, then self-learn. Inputs must be normalized."""
    cutoff = min(cfg.seed_cutoff, X.shape[0], Y.shape[0])
    if cutoff < cfg.seed_cutoff:
        logger.warning(f"Seed cutoff {cfg.seed_cutoff} clamped to {cutoff}")
    seed = similarity_distribution_seed(X, Y, cutoff, normalize_signatures=cfg.signature_normalization)
    result = self_learn(X, Y, seed, cfg.self_learn)
    logger.info(
        f"Mapping done: {result.iterations} iterations, converged={result.converged}, "
        f"|D|={len(result.final_dictionary)}, objective={result.objective_trace[-1]:.6f}"
    )
    return result


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def save_mapping(
    result: MappingResult,
    prefix: str | Path,
    src_vocab: Optional[Vocabulary] = None,
    trg_vocab: Optional[Vocabulary] = None,
) -> dict:
    """Write <prefix>.W.txt, <prefix>.dict.tsv and <prefix>.json; returns the paths."""
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    w_path = save_matrix(result.W, prefix.with_name(prefix.name + ".W.txt"))
    dict_path = prefix.with_name(prefix.name + ".dict.tsv")
    as_words = src_vocab is not None and trg_vocab is not None
    if as_words:
        write_word_pairs(result.final_dictionary.to_word_pairs(src_vocab, trg_vocab), dict_path)
    else:
        write_word_pairs(((str(s), str(t)) for s, t in result.final_dictionary.pairs()), dict_path)
    meta_path = prefix.with_name(prefix.name + ".json")
    with open(meta_path, "w", encoding="utf-8") as f:
        json.dump({
            "objective_trace": result.objective_trace,
            "converged": result.converged,
            "iterations": result.iterations,
            "mode": result.mode,
            "dictionary_format": "words" if as_words else "ids",
        }, f, indent=2, sort_keys=True)
    return {"W": str(w_path), "dictionary": str(dict_path), "meta": str(meta_path)}


def load_mapping(
    prefix: str | Path,
    src_vocab: Optional[Vocabulary] = None,
    trg_vocab: Optional[Vocabulary] = None,
) -> MappingResult:
    prefix = Path(prefix)
    W = load_matrix(prefix.with_name(prefix.name + ".W.txt"))
    with open(prefix.with_name(prefix.name + ".json"), "r", encoding="utf-8") as f:
        meta = json.load(f)
    pairs = read_word_pairs(prefix.with_name(prefix.name + ".dict.tsv"))
    if meta.get("dictionary_format") == "words":
        if src_vocab is None or trg_vocab is None:
            raise ValueError("vocabularies are required to load a word-format dictionary")
        D, _ = BilingualDictionary.from_word_pairs(pairs, src_vocab, trg_vocab)
    else:
        D = BilingualDictionary([int(s) for s, _ in pairs], [int(t) for _, t in pairs])
    return MappingResult(
        W=W,
        final_dictionary=D,
        objective_trace=list(meta["objective_trace"]),
        converged=bool(meta["converged"]),
        iterations=int(meta["iterations"]),
        mode=meta["mode"],
    )
