"""
Monolingual word embeddings: skip-gram with negative sampling (SGNS) and the
plain-text interchange format.

Training works on shuffled minibatches of (center, context) pairs with
vectorized updates. With threads=1 a run is fully determined by rng_seed;
threads>1 runs workers over disjoint batches that update shared rows without
locks (results then vary between runs but stay finite).
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit

from clwe_runtime.config import SgnsConfig
from clwe_runtime.errors import (
    DegenerateVocabulary,
    DimensionMismatch,
    EmptyCorpus,
    NumericalError,
    ParseError,
    ZeroVector,
)
from models import Corpus, EmbeddingMatrix, Vocabulary

logger = logging.getLogger(__name__)

SCORE_CLIP = 6.0
NOISE_POWER = 0.75


def sgns_batch_loss_and_grads(
    v: np.ndarray, u_pos: np.ndarray, u_neg: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Negative-sampling loss and its gradients for a batch of triples.

    v: (B, d) center vectors, u_pos: (B, d) context vectors,
    u_neg: (B, K, d) negative context vectors.

    loss_b = -log sigmoid(v.u_pos) - sum_k log sigmoid(-v.u_neg_k)

    Returns (loss (B,), grad_v (B, d), grad_u_pos (B, d), grad_u_neg (B, K, d)).
    Scores are clipped to +-6 before the sigmoid.
    """
    s_pos = np.clip(np.einsum("bd,bd->b", v, u_pos), -SCORE_CLIP, SCORE_CLIP)
    s_neg = np.clip(np.einsum("bd,bkd->bk", v, u_neg), -SCORE_CLIP, SCORE_CLIP)

    loss = np.logaddexp(0.0, -s_pos) + np.logaddexp(0.0, s_neg).sum(axis=1)

    g_pos = expit(s_pos) - 1.0
    g_neg = expit(s_neg)
    grad_v = g_pos[:, None] * u_pos + np.einsum("bk,bkd->bd", g_neg, u_neg)
    grad_u_pos = g_pos[:, None] * v
    grad_u_neg = g_neg[:, :, None] * v[:, None, :]
    return loss, grad_v, grad_u_pos, grad_u_neg


class SgnsTrainer:
    """Holds the input/output vectors of one SGNS model."""

    def __init__(self, vocab: Vocabulary, cfg: SgnsConfig):
        if len(vocab) < cfg.negatives + 2:
            raise DegenerateVocabulary(
                f"vocabulary of {len(vocab)} words is too small for {cfg.negatives} negatives"
            )
        self.vocab = vocab
        self.cfg = cfg
        self.rng = np.random.default_rng(cfg.rng_seed)

        V, d = len(vocab), cfg.dim
        self.W_in = (self.rng.random((V, d)) - 0.5) / d
        self.W_out = np.zeros((V, d))

        noise = vocab.counts.astype(np.float64) ** NOISE_POWER
        self._noise_cdf = np.cumsum(noise / noise.sum())
        self._noise_cdf[-1] = 1.0
        self._keep_prob = self._subsample_keep_prob()
        self.loss_trace: List[float] = []

    def _subsample_keep_prob(self) -> Optional[np.ndarray]:
        t = self.cfg.subsample
        if t <= 0:
            return None
        freq = self.vocab.counts / max(self.vocab.total_token_count, 1)
        keep = (np.sqrt(freq / t) + 1.0) * t / freq
        return np.minimum(keep, 1.0)

    def _encode(self, corpus: Corpus) -> List[np.ndarray]:
        encoded = [np.asarray(self.vocab.encode(s), dtype=np.int64) for s in corpus.sentences]
        return [ids for ids in encoded if ids.size]

    def _epoch_pairs(self, encoded: List[np.ndarray], rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
        tokens, sent_ids = [], []
        for sid, ids in enumerate(encoded):
            if self._keep_prob is not None:
                ids = ids[rng.random(ids.size) < self._keep_prob[ids]]
            tokens.append(ids)
            sent_ids.append(np.full(ids.size, sid, dtype=np.int64))
        tokens_arr = np.concatenate(tokens) if tokens else np.zeros(0, dtype=np.int64)
        sent_arr = np.concatenate(sent_ids) if sent_ids else np.zeros(0, dtype=np.int64)

        # dynamic window: each center sees a uniformly reduced window
        reach = rng.integers(1, self.cfg.window + 1, size=tokens_arr.size)
        centers, contexts = [], []
        for offset in range(1, self.cfg.window + 1):
            if offset >= tokens_arr.size:
                break
            same = sent_arr[:-offset] == sent_arr[offset:]
            fwd = np.nonzero(same & (reach[:-offset] >= offset))[0]
            bwd = np.nonzero(same & (reach[offset:] >= offset))[0]
            centers.extend([tokens_arr[fwd], tokens_arr[bwd + offset]])
            contexts.extend([tokens_arr[fwd + offset], tokens_arr[bwd]])
        if not centers:
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        c = np.concatenate(centers)
        o = np.concatenate(contexts)
        perm = rng.permutation(c.size)
        return c[perm], o[perm]

    def _sample_negatives(self, shape: Tuple[int, int], rng: np.random.Generator) -> np.ndarray:
        draws = np.searchsorted(self._noise_cdf, rng.random(shape), side="right")
        return np.minimum(draws, len(self.vocab) - 1)

    def _learning_rate(self, progress: float) -> float:
        lr0, lr_min = self.cfg.learning_rate, self.cfg.min_learning_rate
        return max(lr_min, lr0 - (lr0 - lr_min) * progress)

    def _run_batches(
        self,
        centers: np.ndarray,
        contexts: np.ndarray,
        starts: Sequence[int],
        epoch: int,
        rng: np.random.Generator,
    ) -> None:
        bs = self.cfg.batch_size
        n_batches = max(1, -(-centers.size // bs))
        for start in starts:
            c = centers[start:start + bs]
            o = contexts[start:start + bs]
            negs = self._sample_negatives((c.size, self.cfg.negatives), rng)
            progress = (epoch + (start // bs) / n_batches) / self.cfg.epochs
            lr = self._learning_rate(progress)

            loss, g_v, g_pos, g_neg = sgns_batch_loss_and_grads(
                self.W_in[c], self.W_out[o], self.W_out[negs]
            )
            np.add.at(self.W_in, c, -lr * g_v)
            np.add.at(self.W_out, o, -lr * g_pos)
            np.add.at(self.W_out, negs.ravel(), -lr * g_neg.reshape(-1, self.cfg.dim))
            self.loss_trace.append(float(loss.mean()))

    def train(self, corpus: Corpus) -> EmbeddingMatrix:
        encoded = self._encode(corpus)
        if not encoded:
            raise EmptyCorpus(f"corpus '{corpus.language_tag}' has no in-vocabulary tokens")

        threads = self.cfg.threads
        if threads > 1:
            logger.warning(f"SGNS with {threads} threads is nondeterministic")
            worker_rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(self.cfg.rng_seed).spawn(threads)]

        for epoch in range(self.cfg.epochs):
            centers, contexts = self._epoch_pairs(encoded, self.rng)
            starts = list(range(0, centers.size, self.cfg.batch_size))
            if threads == 1:
                self._run_batches(centers, contexts, starts, epoch, self.rng)
            else:
                chunks = [starts[i::threads] for i in range(threads)]
                with ThreadPoolExecutor(max_workers=threads) as pool:
                    futures = [
                        pool.submit(self._run_batches, centers, contexts, chunk, epoch, worker_rngs[i])
                        for i, chunk in enumerate(chunks)
                    ]
                    for f in futures:
                        f.result()
            recent = self.loss_trace[-len(starts):] if starts else []
            logger.debug(
                f"SGNS epoch {epoch + 1}/{self.cfg.epochs}: {centers.size} pairs, "
                f"mean loss {np.mean(recent) if recent else float('nan'):.4f}"
            )

        if not (np.all(np.isfinite(self.W_in)) and np.all(np.isfinite(self.W_out))):
            raise NumericalError("SGNS produced non-finite vectors; lower the learning rate")
        return EmbeddingMatrix(self.vocab, self.W_in.copy())

    @property
    def context_vectors(self) -> np.ndarray:
        return self.W_out

    def predict_contexts(self, word: str, n: int = 5) -> List[str]:
        """Words ranked by sigmoid(v_word . u_context), best first."""
        scores = self.W_out @ self.W_in[self.vocab[word]]
        order = np.argsort(-scores, kind="stable")
        return [self.vocab.words[i] for i in order[:n]]


def train_sgns(corpus: Corpus, vocab: Vocabulary, cfg: SgnsConfig) -> EmbeddingMatrix:
    logger.info(
        f"Training SGNS on '{corpus.language_tag}': V={len(vocab)}, d={cfg.dim}, "
        f"window={cfg.window}, negatives={cfg.negatives}, epochs={cfg.epochs}"
    )
    return SgnsTrainer(vocab, cfg).train(corpus)


def cosine_similarity(u: np.ndarray, v: np.ndarray) -> float:
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise ZeroVector("cosine similarity of a zero vector")
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


# ---------------------------------------------------------------------------
# Interchange format: "V d" header, then "word v1 ... vd" with 6 decimals
# ---------------------------------------------------------------------------

def _write_rows(path: Path, labels: Sequence[str], matrix: np.ndarray) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"{matrix.shape[0]} {matrix.shape[1]}\n")
        for label, row in zip(labels, matrix):
            f.write(label + " " + " ".join(f"{x:.6f}" for x in row) + "\n")
    return path


def _read_rows(path: Path) -> Tuple[List[str], np.ndarray]:
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().split()
        if len(header) != 2:
            raise ParseError("header must be 'V d'", line=1, path=str(path))
        try:
            n_rows, dim = int(header[0]), int(header[1])
        except ValueError as e:
            raise ParseError(f"bad header: {e}", line=1, path=str(path)) from e

        labels: List[str] = []
        rows: List[List[float]] = []
        for lineno, line in enumerate(f, start=2):
            fields = line.rstrip("\n").rstrip(" ").split(" ")
            if fields == [""]:
                continue
            if len(rows) == n_rows:
                raise ParseError(f"more data lines than the {n_rows} declared", line=lineno, path=str(path))
            if len(fields) - 1 != dim:
                raise DimensionMismatch(
                    f"expected {dim} values, got {len(fields) - 1}", line=lineno, path=str(path)
                )
            try:
                rows.append([float(x) for x in fields[1:]])
            except ValueError as e:
                raise ParseError(str(e), line=lineno, path=str(path)) from e
            labels.append(fields[0])

    if len(rows) != n_rows:
        raise ParseError(f"header declares {n_rows} rows, found {len(rows)}", path=str(path))
    return labels, np.asarray(rows, dtype=np.float64).reshape(n_rows, dim)


def save_embeddings(emb: EmbeddingMatrix, path: str | Path) -> Path:
    if not np.all(np.isfinite(emb.matrix)):
        raise NumericalError("refusing to save non-finite embeddings")
    return _write_rows(Path(path), emb.vocab.words, emb.matrix)


def load_embeddings(path: str | Path) -> EmbeddingMatrix:
    words, matrix = _read_rows(Path(path))
    if len(set(words)) != len(words):
        raise ParseError("duplicate words", path=str(path))
    return EmbeddingMatrix(Vocabulary.from_ranked_words(words), matrix)


def save_matrix(matrix: np.ndarray, path: str | Path) -> Path:
    labels = [str(i) for i in range(matrix.shape[0])]
    return _write_rows(Path(path), labels, np.asarray(matrix, dtype=np.float64))


def load_matrix(path: str | Path) -> np.ndarray:
    labels, matrix = _read_rows(Path(path))
    if labels != [str(i) for i in range(len(labels))]:
        raise ParseError("matrix rows must be labelled 0..n-1", path=str(path))
    return matrix
