"""Corpus-level BLEU."""

from __future__ import annotations

import math
from collections import Counter
from typing import List, Sequence

from clwe_runtime.errors import EmptyTestSet, LengthMismatch
from models import Corpus
from schemas import BleuReport

SMOOTHING_EPSILON = 0.1


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def corpus_bleu(
    hypotheses: Sequence[Sequence[str]] | Corpus,
    references: Sequence[Sequence[str]] | Corpus,
    max_n: int = 4,
) -> BleuReport:
    """Clipped n-gram precisions pooled over the corpus, times the brevity penalty.

    `score` is unsmoothed. `smoothed_score` replaces each zero-match
    precision by SMOOTHING_EPSILON / total and `smoothed` says whether that
    happened.
    """
    hyps = list(hypotheses.sentences if isinstance(hypotheses, Corpus) else hypotheses)
    refs = list(references.sentences if isinstance(references, Corpus) else references)
    if len(hyps) != len(refs):
        raise LengthMismatch(f"{len(hyps)} hypotheses for {len(refs)} references")
    if not hyps:
        raise EmptyTestSet("BLEU needs at least one sentence")
    if max_n < 1:
        raise ValueError(f"max_n must be >= 1, got {max_n}")

    matches = [0] * max_n
    totals = [0] * max_n
    hyp_len = ref_len = 0
    for hyp, ref in zip(hyps, refs):
        hyp_len += len(hyp)
        ref_len += len(ref)
        for n in range(1, max_n + 1):
            h = _ngrams(hyp, n)
            r = _ngrams(ref, n)
            matches[n - 1] += sum(min(c, r[g]) for g, c in h.items())
            totals[n - 1] += max(len(hyp) - n + 1, 0)

    precisions: List[float] = [m / t if t > 0 else 0.0 for m, t in zip(matches, totals)]

    if hyp_len == 0:
        bp = 0.0
    elif hyp_len > ref_len:
        bp = 1.0
    else:
        bp = math.exp(1.0 - ref_len / hyp_len)

    if bp == 0.0 or min(precisions) == 0.0:
        score = 0.0
    else:
        score = bp * math.exp(sum(math.log(p) for p in precisions) / max_n)

    smoothed = any(m == 0 for m in matches)
    if smoothed and bp > 0.0:
        floored = [
            m / t if m > 0 else SMOOTHING_EPSILON / max(t, 1)
            for m, t in zip(matches, totals)
        ]
        smoothed_score = bp * math.exp(sum(math.log(p) for p in floored) / max_n)
    else:
        smoothed_score = score

    return BleuReport(
        score=score,
        smoothed_score=smoothed_score,
        smoothed=smoothed,
        precisions=precisions,
        brevity_penalty=bp,
        hyp_length=hyp_len,
        ref_length=ref_len,
        max_n=max_n,
    )
