"""
Word alignment and phrase extraction.

IBM Model 1 estimates t(target | source) by EM (an optional NULL source word
absorbs unaligned target words). Viterbi links from both directions are
symmetrized with grow-diag-final, and consistent phrase pairs up to max_len
words are extracted and scored by relative frequency.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from clwe_runtime.errors import EmptyParallel
from clwe_runtime.phrase_table import Phrase, PhraseTable

logger = logging.getLogger(__name__)

NULL = "<null>"

SentencePair = Tuple[Sequence[str], Sequence[str]]
Link = Tuple[int, int]


@dataclass
class AlignmentModel:
    """t[i, j] = t(target_words[j] | source_words[i]); row 0 is NULL when use_null."""
    source_words: List[str]
    target_words: List[str]
    t: np.ndarray
    use_null: bool = True
    log_likelihood: List[float] = field(default_factory=list)

    def __post_init__(self):
        self._src_index = {w: i for i, w in enumerate(self.source_words)}
        self._trg_index = {w: j for j, w in enumerate(self.target_words)}

    def prob(self, target: str, source: str) -> float:
        i = self._src_index.get(source)
        j = self._trg_index.get(target)
        if i is None or j is None:
            return 0.0
        return float(self.t[i, j])

    def source_ids(self, sentence: Sequence[str]) -> np.ndarray:
        ids = [self._src_index.get(w, -1) for w in sentence]
        if self.use_null:
            ids = [0] + ids
        return np.asarray(ids, dtype=np.int64)

    def target_ids(self, sentence: Sequence[str]) -> np.ndarray:
        return np.asarray([self._trg_index.get(w, -1) for w in sentence], dtype=np.int64)


def _index(sentences: Sequence[Sequence[str]], reserved: Sequence[str] = ()) -> List[str]:
    seen: Dict[str, None] = dict.fromkeys(reserved)
    for s in sentences:
        for w in s:
            seen.setdefault(w, None)
    return list(seen)


def ibm1_align(
    parallel: Sequence[SentencePair],
    em_iterations: int = 5,
    use_null: bool = True,
) -> AlignmentModel:
    """EM for IBM Model 1 from uniform t.

    log_likelihood[k] is the data log-likelihood (up to a constant) under the
    parameters after k EM steps, k = 0..em_iterations.
    """
    pairs = [(tuple(s), tuple(t)) for s, t in parallel if len(t) > 0 and (len(s) > 0 or use_null)]
    if not pairs:
        raise EmptyParallel("IBM Model 1 needs at least one non-empty sentence pair")
    if em_iterations < 1:
        raise ValueError(f"em_iterations must be >= 1, got {em_iterations}")

    source_words = _index([s for s, _ in pairs], reserved=(NULL,) if use_null else ())
    target_words = _index([t for _, t in pairs])
    model = AlignmentModel(
        source_words=source_words,
        target_words=target_words,
        t=np.full((len(source_words), len(target_words)), 1.0 / len(target_words)),
        use_null=use_null,
    )
    encoded = [(model.source_ids(s), model.target_ids(t)) for s, t in pairs]

    for it in range(em_iterations + 1):
        counts = np.zeros_like(model.t)
        ll = 0.0
        for src, trg in encoded:
            block = model.t[np.ix_(src, trg)]
            denom = block.sum(axis=0)
            ll += float(np.sum(np.log(denom / len(src))))
            if it < em_iterations:
                np.add.at(counts, (src[:, None], trg[None, :]), block / denom[None, :])
        model.log_likelihood.append(ll)
        if it == em_iterations:
            break
        totals = counts.sum(axis=1, keepdims=True)
        model.t = np.divide(counts, totals, out=np.zeros_like(counts), where=totals > 0)
        logger.debug(f"IBM1 iteration {it + 1}: log-likelihood {ll:.4f}")

    return model


def viterbi_alignment(model: AlignmentModel, source: Sequence[str], target: Sequence[str]) -> Set[Link]:
    """Best source position for each target word; NULL links are dropped.

    Links are (source index, target index). Equal probabilities prefer the
    earliest source position.
    """
    if not source or not target:
        return set()
    src = model.source_ids(source)
    trg = model.target_ids(target)
    probs = np.where((src[:, None] >= 0) & (trg[None, :] >= 0), model.t[np.ix_(src, trg)], 0.0)
    best = np.argmax(probs, axis=0)
    offset = 1 if model.use_null else 0
    links = set()
    for j, i in enumerate(best.tolist()):
        if probs[i, j] <= 0:
            continue
        if model.use_null and i == 0:
            continue
        links.add((i - offset, j))
    return links


_NEIGHBORS = [(-1, 0), (0, -1), (1, 0), (0, 1), (-1, -1), (-1, 1), (1, -1), (1, 1)]


def symmetrize(forward: Set[Link], backward: Set[Link]) -> Set[Link]:
    """grow-diag-final over the intersection and union of two link sets.

    Both sets use (source index, target index).
    """
    union = forward | backward
    alignment = set(forward & backward)
    src_aligned = {i for i, _ in alignment}
    trg_aligned = {j for _, j in alignment}

    added = True
    while added:
        added = False
        for i, j in sorted(alignment):
            for di, dj in _NEIGHBORS:
                cand = (i + di, j + dj)
                if cand in union and cand not in alignment and (
                    cand[0] not in src_aligned or cand[1] not in trg_aligned
                ):
                    alignment.add(cand)
                    src_aligned.add(cand[0])
                    trg_aligned.add(cand[1])
                    added = True

    for i, j in sorted(union):
        if (i, j) not in alignment and (i not in src_aligned or j not in trg_aligned):
            alignment.add((i, j))
            src_aligned.add(i)
            trg_aligned.add(j)
    return alignment


def extract_phrase_pairs(
    source: Sequence[str],
    target: Sequence[str],
    links: Set[Link],
    max_len: int = 4,
) -> List[Tuple[Phrase, Phrase]]:
    """All phrase pairs consistent with the links, both sides at most max_len words."""
    pairs: List[Tuple[Phrase, Phrase]] = []
    trg_aligned = {j for _, j in links}
    n_src, n_trg = len(source), len(target)

    for s_start in range(n_src):
        for s_end in range(s_start, min(n_src, s_start + max_len)):
            covered = [j for i, j in links if s_start <= i <= s_end]
            if not covered:
                continue
            t_start, t_end = min(covered), max(covered)
            if t_end - t_start + 1 > max_len:
                continue
            if any(t_start <= j <= t_end and not s_start <= i <= s_end for i, j in links):
                continue

            ts = t_start
            while True:
                te = t_end
                while True:
                    if te - ts + 1 <= max_len:
                        pairs.append((tuple(source[s_start:s_end + 1]), tuple(target[ts:te + 1])))
                    te += 1
                    if te >= n_trg or te in trg_aligned:
                        break
                ts -= 1
                if ts < 0 or ts in trg_aligned:
                    break
    return pairs


def extract_phrases(
    pairs: Sequence[SentencePair],
    alignment: AlignmentModel,
    max_len: int = 4,
    reverse_alignment: Optional[AlignmentModel] = None,
) -> PhraseTable:
    """Phrase table with log P(target | source) by relative frequency.

    `alignment` gives t(target | source). With `reverse_alignment`
    (t(source | target)) the two Viterbi alignments are symmetrized.
    """
    joint: Counter = Counter()
    for source, target in pairs:
        links = viterbi_alignment(alignment, source, target)
        if reverse_alignment is not None:
            backward = {(i, j) for j, i in viterbi_alignment(reverse_alignment, target, source)}
            links = symmetrize(links, backward)
        joint.update(extract_phrase_pairs(source, target, links, max_len))

    marginal: Counter = Counter()
    for (s, _), c in joint.items():
        marginal[s] += c

    table = PhraseTable(max_len=max_len)
    for (s, t), c in joint.items():
        table.add(s, t, math.log(c / marginal[s]))
    table.sort()
    logger.info(f"Extracted {len(joint)} phrase pairs over {len(marginal)} source phrases")
    return table
