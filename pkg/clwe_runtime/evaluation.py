"""
Bilingual lexicon induction and word-similarity evaluation, plus report
writers.
"""

from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import Dict, List, Literal, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel
from scipy.stats import spearmanr

from clwe_runtime.crossmap import retrieval_scores
from clwe_runtime.embed import cosine_similarity
from clwe_runtime.errors import AllQueriesOov, EmptyTestSet, InsufficientCoverage, ParseError
from models import BilingualDictionary, EmbeddingMatrix
from schemas import BliReport, WordSimReport

logger = logging.getLogger(__name__)

Embeddings = Union[EmbeddingMatrix, np.ndarray]
TestDictionary = Union[BilingualDictionary, Sequence[Tuple[str, str]]]


def _matrix(emb: Embeddings) -> np.ndarray:
    return emb.matrix if isinstance(emb, EmbeddingMatrix) else np.asarray(emb, dtype=np.float64)


def _gold_groups(
    test_dict: TestDictionary,
    X: Embeddings,
    Y: Embeddings,
    n_src: int,
    n_trg: int,
) -> Tuple[Dict[int, List[int]], int, int]:
    """Gold target ids per in-vocabulary query, the OOV query count and the total query count."""
    groups: Dict[int, List[int]] = {}
    oov = 0
    if isinstance(test_dict, BilingualDictionary):
        raw = test_dict.grouped()
        for s, targets in raw.items():
            gold = sorted({t for t in targets if t < n_trg})
            if s >= n_src or not gold:
                oov += 1
            else:
                groups[s] = gold
        return groups, oov, len(raw)

    if not isinstance(X, EmbeddingMatrix) or not isinstance(Y, EmbeddingMatrix):
        raise TypeError("word-pair test dictionaries need EmbeddingMatrix inputs")
    by_word: Dict[str, List[str]] = {}
    for s, t in test_dict:
        by_word.setdefault(s, []).append(t)
    for s, targets in by_word.items():
        si = X.vocab.get(s)
        gold = sorted({ti for ti in (Y.vocab.get(t) for t in targets) if ti is not None and ti < n_trg})
        if si is None or si >= n_src or not gold:
            oov += 1
        else:
            groups[si] = gold
    return groups, oov, len(by_word)


def bli_evaluate(
    W: np.ndarray,
    X: Embeddings,
    Y: Embeddings,
    test_dict: TestDictionary,
    retrieval: Literal["cosine", "csls"] = "csls",
    csls_k: int = 10,
    candidate_cutoff: Optional[int] = None,
) -> BliReport:
    """MRR and P@1 of the mapped source queries against the test dictionary.

    Every target (or the first candidate_cutoff targets) is ranked; the rank
    of a query is that of its best gold target, with equal scores ordered by
    target id. Queries whose word or every gold target is out of vocabulary
    are skipped and counted in oov_count.
    """
    Xm, Ym = _matrix(X), _matrix(Y)
    n_trg = Ym.shape[0] if candidate_cutoff is None else min(candidate_cutoff, Ym.shape[0])
    groups, oov, total = _gold_groups(test_dict, X, Y, Xm.shape[0], n_trg)
    if total == 0:
        raise EmptyTestSet("the test dictionary is empty")
    if not groups:
        raise AllQueriesOov(f"all {total} test queries are out of vocabulary")
    if oov:
        logger.info(f"BLI: {oov} of {total} queries are out of vocabulary")

    k = csls_k
    if retrieval == "csls" and k >= n_trg:
        k = max(1, n_trg - 1)
        logger.warning(f"csls_k {csls_k} clamped to {k} for {n_trg} candidate targets")

    query_ids = np.asarray(sorted(groups), dtype=np.int64)
    mapped = Xm @ np.asarray(W, dtype=np.float64)
    scores = retrieval_scores(mapped, Ym[:n_trg], query_ids, method=retrieval, k=k)
    target_ids = np.arange(n_trg)

    ranks: List[int] = []
    for row, q in zip(scores, query_ids.tolist()):
        best = None
        for g in groups[q]:
            s = row[g]
            rank = 1 + int(np.sum(row > s)) + int(np.sum((row == s) & (target_ids < g)))
            best = rank if best is None else min(best, rank)
        ranks.append(best)

    rr = np.array([1.0 / r for r in ranks])
    return BliReport(
        mrr=float(rr.mean()),
        p_at_1=float(np.mean([r == 1 for r in ranks])),
        ranks=ranks,
        query_ids=query_ids.tolist(),
        oov_count=oov,
        retrieval=retrieval,
        csls_k=k if retrieval == "csls" else None,
    )


def word_similarity_eval(
    emb: EmbeddingMatrix,
    scored_pairs: Sequence[Tuple[str, str, float]],
) -> WordSimReport:
    """Spearman correlation of cosine similarity with human scores over covered pairs."""
    model_scores, human_scores = [], []
    for w1, w2, score in scored_pairs:
        if w1 in emb.vocab and w2 in emb.vocab:
            model_scores.append(cosine_similarity(emb.vector(w1), emb.vector(w2)))
            human_scores.append(float(score))
    total = len(scored_pairs)
    if len(model_scores) < 2:
        raise InsufficientCoverage(f"only {len(model_scores)} of {total} pairs are in vocabulary")

    rho, _ = spearmanr(model_scores, human_scores)
    if math.isnan(rho):
        raise InsufficientCoverage("Spearman correlation is undefined for constant scores")
    return WordSimReport(
        spearman_rho=float(np.clip(rho, -1.0, 1.0)),
        pair_coverage=len(model_scores) / total,
        covered_pairs=len(model_scores),
        total_pairs=total,
    )


def read_word_similarity(path: str | Path) -> List[Tuple[str, str, float]]:
    pairs = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise ParseError("expected 'word1<TAB>word2<TAB>score'", line=lineno, path=str(path))
            try:
                score = float(fields[2])
            except ValueError as e:
                raise ParseError(f"bad score '{fields[2]}'", line=lineno, path=str(path)) from e
            pairs.append((fields[0].lower(), fields[1].lower(), score))
    return pairs


def write_report_json(report: BaseModel, path: str | Path) -> Path:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    to_json = getattr(report, "to_json", None)
    text = to_json() if callable(to_json) else report.model_dump_json(indent=2)
    out.write_text(text + "\n", encoding="utf-8")
    return out


def write_bli_table(rows: Mapping[str, Mapping[str, BliReport]], path: str | Path) -> Path:
    """One row per label with an MRR / P@1 column pair per direction."""
    directions: List[str] = []
    for per_dir in rows.values():
        for d in per_dir:
            if d not in directions:
                directions.append(d)

    header = ["label"] + [f"{d} {m}" for d in directions for m in ("MRR", "P@1")]
    table = [header]
    for label, per_dir in rows.items():
        cells = [label]
        for d in directions:
            report = per_dir.get(d)
            cells += ["-", "-"] if report is None else [f"{report.mrr:.3f}", f"{report.p_at_1:.3f}"]
        table.append(cells)

    widths = [max(len(r[i]) for r in table) for i in range(len(header))]
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as f:
        for r in table:
            f.write("\t".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() + "\n")
    return out
