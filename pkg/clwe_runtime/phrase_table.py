"""
Phrase tables: induction from a cross-lingual space, merging and TSV I/O.
"""

from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import Dict, Iterator, List, Literal, Optional, Tuple

import numpy as np
from scipy.special import log_softmax

from clwe_runtime.crossmap import _unit_rows, rank_targets, retrieval_scores
from clwe_runtime.errors import ParseError
from models import EmbeddingMatrix, MappingResult

logger = logging.getLogger(__name__)

Phrase = Tuple[str, ...]
Candidate = Tuple[Phrase, float]


class PhraseTable:
    """Source phrase -> candidates (target phrase, log score), best first."""

    def __init__(self, entries: Optional[Dict[Phrase, List[Candidate]]] = None, max_len: int = 1):
        self.entries: Dict[Phrase, List[Candidate]] = {}
        self.max_len = max_len
        for src, cands in (entries or {}).items():
            for tgt, score in cands:
                self.add(src, tgt, score)
        self.sort()

    def add(self, source: Phrase, target: Phrase, score: float) -> None:
        if not math.isfinite(score):
            raise ValueError(f"non-finite score for {source} -> {target}")
        source, target = tuple(source), tuple(target)
        self.entries.setdefault(source, []).append((target, float(score)))
        self.max_len = max(self.max_len, len(source))

    def sort(self) -> None:
        for cands in self.entries.values():
            cands.sort(key=lambda c: (-c[1], c[0]))

    def candidates(self, source: Phrase) -> List[Candidate]:
        return self.entries.get(tuple(source), [])

    def __contains__(self, source: Phrase) -> bool:
        return tuple(source) in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[Tuple[Phrase, Phrase, float]]:
        for src in sorted(self.entries):
            for tgt, score in self.entries[src]:
                yield src, tgt, score

    @property
    def pair_count(self) -> int:
        return sum(len(c) for c in self.entries.values())

    def target_vocabulary(self) -> set:
        return {w for cands in self.entries.values() for tgt, _ in cands for w in tgt}

    def union(self, other: "PhraseTable") -> "PhraseTable":
        """Pairs of both tables; a pair present in both keeps the higher score."""
        best: Dict[Tuple[Phrase, Phrase], float] = {}
        for src, tgt, score in list(self) + list(other):
            key = (src, tgt)
            if key not in best or score > best[key]:
                best[key] = score
        merged = PhraseTable(max_len=max(self.max_len, other.max_len))
        for (src, tgt), score in best.items():
            merged.add(src, tgt, score)
        merged.sort()
        return merged

    def truncate(self, max_candidates: Optional[int]) -> "PhraseTable":
        if max_candidates is None:
            return self
        return PhraseTable(
            {src: cands[:max_candidates] for src, cands in self.entries.items()},
            max_len=self.max_len,
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PhraseTable):
            return NotImplemented
        return self.entries == other.entries

    def __repr__(self) -> str:
        return f"PhraseTable(sources={len(self)}, pairs={self.pair_count}, max_len={self.max_len})"


def induce_phrase_table(
    mapping: MappingResult,
    X: EmbeddingMatrix,
    Y: EmbeddingMatrix,
    top_phrases: int,
    n_neighbors: int,
    temperature: float = 0.1,
    retrieval: Literal["cosine", "csls"] = "csls",
    csls_k: int = 10,
) -> PhraseTable:
    """Unigram table from nearest neighbors in the mapped space.

    The top_phrases most frequent source words each get their n_neighbors
    best targets (by `retrieval`); scores are a log-softmax over the
    candidates' cosine similarities divided by `temperature`.
    """
    n_src = min(top_phrases, len(X))
    if n_src < top_phrases:
        logger.warning(f"top_phrases {top_phrases} clamped to source vocabulary size {n_src}")
    n_best = min(n_neighbors, len(Y))
    k = csls_k
    if retrieval == "csls" and k >= len(Y):
        k = max(1, len(Y) - 1)
        logger.warning(f"csls_k {csls_k} clamped to {k} for {len(Y)} targets")

    mapped = mapping.apply(X.matrix)
    query_ids = np.arange(n_src)
    scores = retrieval_scores(mapped, Y.matrix, query_ids, method=retrieval, k=k)
    neighbors = rank_targets(scores, n_best)
    cosines = _unit_rows(mapped[query_ids]) @ _unit_rows(Y.matrix).T

    table = PhraseTable(max_len=1)
    for qi, row in zip(query_ids.tolist(), neighbors):
        logp = log_softmax(cosines[qi, row] / temperature)
        src = (X.vocab.words[qi],)
        for tj, lp in zip(row.tolist(), logp.tolist()):
            table.add(src, (Y.vocab.words[tj],), lp)
    table.sort()
    logger.info(f"Induced phrase table: {len(table)} sources x {n_best} candidates")
    return table


def write_phrase_table(table: PhraseTable, path: str | Path) -> Path:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as f:
        for src, tgt, score in table:
            f.write(f"{' '.join(src)}\t{' '.join(tgt)}\t{score:.6f}\n")
    return out


def read_phrase_table(path: str | Path) -> PhraseTable:
    table = PhraseTable(max_len=1)
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise ParseError("expected 'source<TAB>target<TAB>score'", line=lineno, path=str(path))
            try:
                score = float(fields[2])
            except ValueError as e:
                raise ParseError(f"bad score '{fields[2]}'", line=lineno, path=str(path)) from e
            if not math.isfinite(score):
                raise ParseError(f"non-finite score '{fields[2]}'", line=lineno, path=str(path))
            table.add(tuple(fields[0].split(" ")), tuple(fields[1].split(" ")), score)
    table.sort()
    return table
