"""
Fixture builders and brute-force oracles shared by the test modules.

Rotation fixtures give a source space X and a target Y = X Q^T (+ noise),
so the mapping that recovers Y from X in the row convention is W = Q^T.
The oracles enumerate every candidate answer for tiny inputs and are the
reference the optimized code is checked against.
"""

from __future__ import annotations

import itertools
from typing import Dict, Iterable, List, Sequence, Set, Tuple

import numpy as np
from scipy.stats import ortho_group

from clwe_runtime.config import PipelineConfig
from models import Corpus, EmbeddingMatrix, Vocabulary


def random_rotation(d: int, seed: int = 0) -> np.ndarray:
    return ortho_group.rvs(d, random_state=seed)


def rotation_fixture(
    V: int = 500,
    d: int = 16,
    noise: float = 0.0,
    seed: int = 0,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(X, Y, Q) with unit-length X rows, mean-centered then renormalized, and Y = X Q^T + eps."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(V, d))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    X -= X.mean(axis=0, keepdims=True)
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    Q = random_rotation(d, seed + 1)
    Y = X @ Q.T
    if noise > 0:
        Y = Y + noise * rng.normal(size=Y.shape)
    return X, Y, Q


def word_space(prefix: str, matrix: np.ndarray) -> EmbeddingMatrix:
    words = [f"{prefix}{i}" for i in range(matrix.shape[0])]
    return EmbeddingMatrix(Vocabulary.from_ranked_words(words), matrix)


def toy_corpus(lines: Sequence[str], tag: str = "src") -> Corpus:
    return Corpus.from_sentences([line.split() for line in lines], tag)


def random_parallel_corpus(
    n_pairs: int,
    src_vocab: Sequence[str],
    trg_vocab: Sequence[str],
    max_len: int,
    rng: np.random.Generator,
) -> List[Tuple[Tuple[str, ...], Tuple[str, ...]]]:
    pairs = []
    for _ in range(n_pairs):
        ls = int(rng.integers(1, max_len + 1))
        lt = int(rng.integers(1, max_len + 1))
        pairs.append((
            tuple(rng.choice(src_vocab, size=ls)),
            tuple(rng.choice(trg_vocab, size=lt)),
        ))
    return pairs


# ---------------------------------------------------------------------------
# brute-force oracles
# ---------------------------------------------------------------------------

def brute_force_phrase_pairs(
    source: Sequence[str],
    target: Sequence[str],
    links: Set[Tuple[int, int]],
    max_len: int,
) -> List[Tuple[Tuple[str, ...], Tuple[str, ...]]]:
    """Every (source span, target span) consistent with the links, by enumeration."""
    pairs = []
    for s1 in range(len(source)):
        for s2 in range(s1, min(len(source), s1 + max_len)):
            for t1 in range(len(target)):
                for t2 in range(t1, min(len(target), t1 + max_len)):
                    inside = [(i, j) for i, j in links if s1 <= i <= s2 and t1 <= j <= t2]
                    if not inside:
                        continue
                    crossing = any(
                        (s1 <= i <= s2) != (t1 <= j <= t2) for i, j in links
                    )
                    if not crossing:
                        pairs.append((tuple(source[s1:s2 + 1]), tuple(target[t1:t2 + 1])))
    return pairs


def segmentations(n: int, max_len: int) -> Iterable[Tuple[int, ...]]:
    if n == 0:
        yield ()
        return
    for first in range(1, min(max_len, n) + 1):
        for rest in segmentations(n - first, max_len):
            yield (first,) + rest


def exhaustive_best_score(model, source: Sequence[str]) -> float:
    """Best decoder objective over every segmentation and candidate choice."""
    from clwe_runtime.decoder import score_derivation

    source = tuple(source)
    best = -np.inf
    for seg in segmentations(len(source), model.max_phrase_len):
        spans, i = [], 0
        for length in seg:
            spans.append(source[i:i + length])
            i += length
        options = [model.options(span) for span in spans]
        if any(not o for o in options):
            continue
        for choice in itertools.product(*options):
            derivation = [(len(span), tgt) for span, (tgt, _) in zip(spans, choice)]
            best = max(best, score_derivation(model, source, derivation))
    return best


def hand_spearman(x: Sequence[float], y: Sequence[float]) -> float:
    """Pearson correlation of average ranks."""
    def ranks(values):
        order = sorted(range(len(values)), key=lambda i: values[i])
        r = [0.0] * len(values)
        i = 0
        while i < len(order):
            j = i
            while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
                j += 1
            for k in range(i, j + 1):
                r[order[k]] = (i + j) / 2.0 + 1.0
            i = j + 1
        return r

    rx, ry = np.array(ranks(x)), np.array(ranks(y))
    rx -= rx.mean()
    ry -= ry.mean()
    return float((rx @ ry) / np.sqrt((rx @ rx) * (ry @ ry)))


# ---------------------------------------------------------------------------
# configs
# ---------------------------------------------------------------------------

def tiny_pipeline_config(out_dir: str, seed: int = 0, **overrides) -> PipelineConfig:
    """A configuration small enough to run the whole pipeline in seconds."""
    data: Dict = {
        "synthetic": {
            "latent_vocab_size": 60,
            "sentence_count": 400,
            "sentence_length_range": [5, 9],
            "shared_content_fraction": 0.5,
            "held_out_count": 20,
        },
        "embedding": {"dim": 16, "window": 2, "negatives": 3, "epochs": 2, "batch_size": 128},
        "mapping": {
            "seed_cutoff": 60,
            "self_learn": {"max_iterations": 5, "vocab_cutoff": 60, "csls_k": 5, "dropout": 0.0},
        },
        "umt": {
            "lm": {"order": 3},
            "phrase_induction": {"top_phrases": 60, "n_neighbors": 3, "csls_k": 5},
            "decoder": {"beam_size": 3, "max_candidates": 3, "max_phrase_len": 2},
            "backtrans": {"steps": 1, "sample_size": 50, "em_iterations": 2, "max_phrase_len": 2},
        },
        "evaluation": {"csls_k": 5, "synthetic_test_top": 50},
        "eigsim": {"top_m": 40, "k_nn": 5},
        "output_dir": str(out_dir),
    }
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(data.get(key), dict):
            data[key] = {**data[key], **value}
        else:
            data[key] = value
    return PipelineConfig(**data).with_seed(seed)


def best_rank_oracle(scores: np.ndarray, gold: Sequence[int]) -> int:
    """1-based rank of the best gold target with id-ordered ties, by sorting."""
    order = sorted(range(len(scores)), key=lambda j: (-scores[j], j))
    return min(order.index(g) for g in gold) + 1


__all__ = [
    "best_rank_oracle",
    "brute_force_phrase_pairs",
    "exhaustive_best_score",
    "hand_spearman",
    "random_parallel_corpus",
    "random_rotation",
    "rotation_fixture",
    "segmentations",
    "tiny_pipeline_config",
    "toy_corpus",
    "word_space",
]
