"""Core domain types shared by every stage of the toolkit."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from clwe_runtime.errors import DimensionMismatch, EmptyVocabulary, NumericalError


Sentence = Tuple[str, ...]


@dataclass(frozen=True)
class Corpus:
    """Tokenized sentences of one language. Empty tokens and sentences are dropped."""
    sentences: Tuple[Sentence, ...]
    language_tag: str

    def __post_init__(self):
        cleaned = []
        for sentence in self.sentences:
            tokens = tuple(t for t in sentence if t)
            if tokens:
                cleaned.append(tokens)
        object.__setattr__(self, "sentences", tuple(cleaned))

    @classmethod
    def from_sentences(cls, sentences: Iterable[Sequence[str]], language_tag: str) -> "Corpus":
        return cls(tuple(tuple(s) for s in sentences), language_tag)

    def __len__(self) -> int:
        return len(self.sentences)

    def __iter__(self) -> Iterator[Sentence]:
        return iter(self.sentences)

    def __getitem__(self, index: int) -> Sentence:
        return self.sentences[index]

    @property
    def token_count(self) -> int:
        return sum(len(s) for s in self.sentences)

    def counts(self) -> Counter:
        counter: Counter = Counter()
        for sentence in self.sentences:
            counter.update(sentence)
        return counter

    def subset(self, indices: Iterable[int]) -> "Corpus":
        return Corpus(tuple(self.sentences[i] for i in indices), self.language_tag)


class Vocabulary:
    """Dense word ids ordered by descending frequency, ties lexicographic."""

    def __init__(self, words: Sequence[str], counts: Sequence[int]):
        if len(words) != len(counts):
            raise ValueError("words and counts must have the same length")
        if not words:
            raise EmptyVocabulary("vocabulary has no words")
        self.words: List[str] = list(words)
        self.counts = np.asarray(counts, dtype=np.int64)
        self.word2id: Dict[str, int] = {w: i for i, w in enumerate(self.words)}
        if len(self.word2id) != len(self.words):
            raise ValueError("duplicate words in vocabulary")

    @classmethod
    def from_counts(cls, counts: Dict[str, int], min_count: int = 1) -> "Vocabulary":
        kept = [(w, c) for w, c in counts.items() if c >= min_count]
        if not kept:
            raise EmptyVocabulary(f"no word reaches min_count={min_count}")
        kept.sort(key=lambda wc: (-wc[1], wc[0]))
        return cls([w for w, _ in kept], [c for _, c in kept])

    @classmethod
    def from_ranked_words(cls, words: Sequence[str]) -> "Vocabulary":
        """Keep the given order; counts are synthetic (V - rank)."""
        n = len(words)
        return cls(list(words), list(range(n, 0, -1)))

    @property
    def total_token_count(self) -> int:
        return int(self.counts.sum())

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self.word2id

    def __getitem__(self, word: str) -> int:
        return self.word2id[word]

    def get(self, word: str, default: Optional[int] = None) -> Optional[int]:
        return self.word2id.get(word, default)

    def most_frequent(self, n: int) -> np.ndarray:
        return np.arange(min(n, len(self.words)), dtype=np.int64)

    def encode(self, sentence: Sequence[str]) -> List[int]:
        """Ids of in-vocabulary tokens; unknown tokens are dropped."""
        return [self.word2id[t] for t in sentence if t in self.word2id]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Vocabulary):
            return NotImplemented
        return self.words == other.words and np.array_equal(self.counts, other.counts)

    def __repr__(self) -> str:
        return f"Vocabulary(size={len(self)}, tokens={self.total_token_count})"


@dataclass
class EmbeddingMatrix:
    vocab: Vocabulary
    matrix: np.ndarray

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        if self.matrix.ndim != 2:
            raise DimensionMismatch(f"embedding matrix must be 2-D, got shape {self.matrix.shape}")
        if self.matrix.shape[0] != len(self.vocab):
            raise DimensionMismatch(
                f"{self.matrix.shape[0]} rows for a vocabulary of {len(self.vocab)} words"
            )
        if not np.all(np.isfinite(self.matrix)):
            raise NumericalError("embedding matrix contains non-finite values")

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[1])

    def __len__(self) -> int:
        return int(self.matrix.shape[0])

    def vector(self, word: str) -> np.ndarray:
        return self.matrix[self.vocab[word]]

    def with_matrix(self, matrix: np.ndarray) -> "EmbeddingMatrix":
        return EmbeddingMatrix(self.vocab, matrix)


class BilingualDictionary:
    """Ordered (source id, target id) pairs with optional weights.

    Exact duplicate pairs are dropped, keeping the first occurrence.
    """

    def __init__(
        self,
        src_ids: Sequence[int],
        trg_ids: Sequence[int],
        weights: Optional[Sequence[float]] = None,
    ):
        src = np.asarray(src_ids, dtype=np.int64).ravel()
        trg = np.asarray(trg_ids, dtype=np.int64).ravel()
        if src.shape != trg.shape:
            raise ValueError("source and target id arrays differ in length")
        if src.size and (src.min() < 0 or trg.min() < 0):
            raise ValueError("dictionary ids must be non-negative")
        w = None if weights is None else np.asarray(weights, dtype=np.float64).ravel()
        if w is not None and w.shape != src.shape:
            raise ValueError("weights must match the number of pairs")

        seen = set()
        keep = []
        for i, pair in enumerate(zip(src.tolist(), trg.tolist())):
            if pair not in seen:
                seen.add(pair)
                keep.append(i)
        keep_idx = np.asarray(keep, dtype=np.int64)
        self.src_ids = src[keep_idx]
        self.trg_ids = trg[keep_idx]
        self.weights = None if w is None else w[keep_idx]

    @classmethod
    def from_pairs(cls, pairs: Iterable[Tuple[int, int]]) -> "BilingualDictionary":
        pairs = list(pairs)
        return cls([s for s, _ in pairs], [t for _, t in pairs])

    @classmethod
    def from_word_pairs(
        cls,
        pairs: Iterable[Tuple[str, str]],
        src_vocab: Vocabulary,
        trg_vocab: Vocabulary,
    ) -> Tuple["BilingualDictionary", int]:
        """Id dictionary over the pairs whose words are both in vocabulary, plus the skip count."""
        src, trg = [], []
        skipped = 0
        for s, t in pairs:
            si, ti = src_vocab.get(s), trg_vocab.get(t)
            if si is None or ti is None:
                skipped += 1
                continue
            src.append(si)
            trg.append(ti)
        return cls(src, trg), skipped

    def to_word_pairs(self, src_vocab: Vocabulary, trg_vocab: Vocabulary) -> List[Tuple[str, str]]:
        return [(src_vocab.words[s], trg_vocab.words[t]) for s, t in self.pairs()]

    def pairs(self) -> List[Tuple[int, int]]:
        return list(zip(self.src_ids.tolist(), self.trg_ids.tolist()))

    def grouped(self) -> Dict[int, List[int]]:
        groups: Dict[int, List[int]] = {}
        for s, t in self.pairs():
            groups.setdefault(s, []).append(t)
        return groups

    def inverted(self) -> "BilingualDictionary":
        return BilingualDictionary(self.trg_ids, self.src_ids, self.weights)

    def __len__(self) -> int:
        return int(self.src_ids.size)

    def __iter__(self):
        return iter(self.pairs())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BilingualDictionary):
            return NotImplemented
        return np.array_equal(self.src_ids, other.src_ids) and np.array_equal(self.trg_ids, other.trg_ids)

    def __repr__(self) -> str:
        return f"BilingualDictionary(pairs={len(self)})"


@dataclass
class MappingResult:
    """Row-vector convention: a source row x maps to x @ W."""
    W: np.ndarray
    final_dictionary: BilingualDictionary
    objective_trace: List[float] = field(default_factory=list)
    converged: bool = False
    iterations: int = 0
    mode: str = "orthogonal"

    def apply(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X) @ self.W

    def orthogonality_error(self) -> float:
        d = self.W.shape[0]
        return float(np.linalg.norm(self.W.T @ self.W - np.eye(d)))

    def reverse_matrix(self) -> np.ndarray:
        """Target-to-source transform: the transpose when orthogonal, else the pseudo-inverse."""
        if self.mode == "orthogonal":
            return self.W.T.copy()
        return np.linalg.pinv(self.W)
