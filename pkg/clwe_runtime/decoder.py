"""
Monotone phrase-based beam decoder.

A hypothesis covers a source prefix. Stacks are indexed by the number of
covered source words and hypotheses with equal language-model state are
recombined, so an unbounded beam is exact search. The objective is

    w_tm * sum(phrase log scores) + w_lm * log P_lm(target + </s>) + w_wp * len(target)

Source words without a unigram entry are copied through with a phrase score
of zero.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

from clwe_runtime.errors import LanguageMismatch
from clwe_runtime.lm import BOS, EOS, LanguageModel, next_state
from clwe_runtime.phrase_table import Phrase, PhraseTable
from models import Corpus

logger = logging.getLogger(__name__)

Segment = Tuple[int, Phrase]


@dataclass(frozen=True)
class UmtModel:
    source_language: str
    target_language: str
    phrase_table: PhraseTable
    lm: LanguageModel
    w_tm: float = 1.0
    w_lm: float = 1.0
    w_wp: float = 0.0
    max_phrase_len: int = 4
    max_candidates: Optional[int] = None

    def __post_init__(self):
        for name in ("w_tm", "w_lm", "w_wp"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    def with_table(self, table: PhraseTable) -> "UmtModel":
        return replace(self, phrase_table=table)

    def options(self, source_phrase: Phrase) -> List[Tuple[Phrase, float]]:
        cands = self.phrase_table.candidates(source_phrase)
        if self.max_candidates is not None:
            cands = cands[: self.max_candidates]
        if not cands and len(source_phrase) == 1:
            return [(tuple(source_phrase), 0.0)]
        return cands


@dataclass(frozen=True)
class Hypothesis:
    score: float
    state: Tuple[str, ...]
    tokens: Tuple[str, ...]
    segments: Tuple[Segment, ...]

    def beats(self, other: "Hypothesis") -> bool:
        if self.score != other.score:
            return self.score > other.score
        return self.segments < other.segments


def _initial_state(model: UmtModel) -> Tuple[str, ...]:
    return next_state((), BOS, model.lm.order)


def _lm_phrase(model: UmtModel, state: Tuple[str, ...], target: Phrase) -> Tuple[float, Tuple[str, ...]]:
    total = 0.0
    for w in target:
        total += model.lm.logprob(w, state)
        state = next_state(state, w, model.lm.order)
    return total, state


def _finish(model: UmtModel, hyp: Hypothesis) -> Hypothesis:
    end = model.w_lm * model.lm.logprob(EOS, hyp.state)
    return replace(hyp, score=hyp.score + end)


def decode_hypothesis(source: Sequence[str], model: UmtModel, beam_size: Optional[int] = 10) -> Hypothesis:
    """Best complete hypothesis; beam_size None keeps every recombined state."""
    if beam_size is not None and beam_size < 1:
        raise ValueError(f"beam_size must be >= 1, got {beam_size}")
    source = tuple(source)
    n = len(source)
    start = Hypothesis(0.0, _initial_state(model), (), ())
    if n == 0:
        return _finish(model, start)

    stacks: List[Dict[Tuple[str, ...], Hypothesis]] = [dict() for _ in range(n + 1)]
    stacks[0][start.state] = start
    lm_memo: Dict[Tuple[Tuple[str, ...], Phrase], Tuple[float, Tuple[str, ...]]] = {}

    for i in range(n):
        hyps = sorted(stacks[i].values(), key=lambda h: (-h.score, h.segments))
        if beam_size is not None:
            hyps = hyps[:beam_size]
        for hyp in hyps:
            for length in range(1, min(model.max_phrase_len, n - i) + 1):
                src = source[i:i + length]
                for tgt, tm in model.options(src):
                    key = (hyp.state, tgt)
                    if key not in lm_memo:
                        lm_memo[key] = _lm_phrase(model, hyp.state, tgt)
                    lm_score, state = lm_memo[key]
                    new = Hypothesis(
                        score=hyp.score + model.w_tm * tm + model.w_lm * lm_score + model.w_wp * len(tgt),
                        state=state,
                        tokens=hyp.tokens + tgt,
                        segments=hyp.segments + ((length, tgt),),
                    )
                    stack = stacks[i + length]
                    current = stack.get(state)
                    if current is None or new.beats(current):
                        stack[state] = new

    best: Optional[Hypothesis] = None
    for hyp in stacks[n].values():
        done = _finish(model, hyp)
        if best is None or done.beats(best):
            best = done
    return best


def decode(source: Sequence[str], model: UmtModel, beam_size: Optional[int] = 10) -> Tuple[str, ...]:
    return decode_hypothesis(source, model, beam_size).tokens


def score_derivation(model: UmtModel, source: Sequence[str], derivation: Sequence[Segment]) -> float:
    """Objective value of one segmentation with fixed target choices.

    `derivation` lists (source phrase length, target phrase) left to right.
    """
    source = tuple(source)
    if sum(length for length, _ in derivation) != len(source):
        raise ValueError("derivation does not cover the source sentence")
    state = _initial_state(model)
    score = 0.0
    i = 0
    for length, tgt in derivation:
        tgt = tuple(tgt)
        # options are best first, so a repeated target keeps its best score
        scores = dict(reversed(model.options(source[i:i + length])))
        if tgt not in scores:
            raise ValueError(f"{tgt} is not a candidate for {source[i:i + length]}")
        lm_score, state = _lm_phrase(model, state, tgt)
        score += model.w_tm * scores[tgt] + model.w_lm * lm_score + model.w_wp * len(tgt)
        i += length
    return score + model.w_lm * model.lm.logprob(EOS, state)


def translate_corpus(
    corpus: Corpus,
    model: UmtModel,
    beam_size: Optional[int] = 10,
    threads: int = 1,
) -> Corpus:
    """One translation per sentence, order preserved."""
    if corpus.language_tag != model.source_language:
        raise LanguageMismatch(
            f"model translates '{model.source_language}' but the corpus is '{corpus.language_tag}'"
        )
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outputs = list(pool.map(lambda s: decode(s, model, beam_size), corpus.sentences))
    else:
        outputs = [decode(s, model, beam_size) for s in corpus.sentences]
    # an empty translation would be dropped by Corpus and break alignment with the input
    outputs = [out if out else src for out, src in zip(outputs, corpus.sentences)]
    logger.info(
        f"Translated {len(corpus)} sentences {model.source_language}->{model.target_language}"
    )
    return Corpus(tuple(outputs), model.target_language)
