"""
Iterative back-translation.

Each step samples monolingual sentences on both sides, translates them with
the current models, and learns new phrase tables from the resulting
(synthetic, original) pairs. Both directions are refreshed from the previous
step's models. Language models are never retrained.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from clwe_runtime.alignment import extract_phrases, ibm1_align
from clwe_runtime.bleu import corpus_bleu
from clwe_runtime.config import BacktransConfig
from clwe_runtime.corpus import sample_sentences
from clwe_runtime.decoder import UmtModel, translate_corpus
from clwe_runtime.phrase_table import PhraseTable
from models import Corpus
from schemas import BacktransStep

logger = logging.getLogger(__name__)


@dataclass
class BacktransResult:
    model_st: UmtModel
    model_ts: UmtModel
    history: List[BacktransStep] = field(default_factory=list)

    @property
    def bleu_st(self) -> List[Optional[float]]:
        return [h.bleu_st for h in self.history]


def _held_out_bleu(
    model_st: UmtModel,
    model_ts: UmtModel,
    held_out: Optional[Tuple[Corpus, Corpus]],
    beam_size: Optional[int],
    threads: int,
) -> Tuple[Optional[float], Optional[float]]:
    if held_out is None:
        return None, None
    src, trg = held_out
    st = corpus_bleu(translate_corpus(src, model_st, beam_size, threads), trg).score
    ts = corpus_bleu(translate_corpus(trg, model_ts, beam_size, threads), src).score
    return st, ts


def learn_phrase_table(
    synthetic: Corpus,
    original: Corpus,
    em_iterations: int,
    max_len: int,
) -> PhraseTable:
    """Phrase table translating synthetic-side phrases into original-side phrases."""
    pairs = list(zip(synthetic.sentences, original.sentences))
    forward = ibm1_align(pairs, em_iterations)
    backward = ibm1_align([(t, s) for s, t in pairs], em_iterations)
    return extract_phrases(pairs, forward, max_len=max_len, reverse_alignment=backward)


def back_translate_refine(
    model_st: UmtModel,
    model_ts: UmtModel,
    corpus_s: Corpus,
    corpus_t: Corpus,
    cfg: BacktransConfig,
    beam_size: Optional[int] = 10,
    threads: int = 1,
    held_out: Optional[Tuple[Corpus, Corpus]] = None,
) -> BacktransResult:
    """Run cfg.steps refinement steps.

    history[0] holds the held-out BLEU of the initial models; entry i the
    BLEU after step i. With keep_induced_table the initial tables stay in
    the union with every learned table.
    """
    rng = np.random.default_rng(cfg.rng_seed)
    n_s = min(cfg.sample_size, len(corpus_s))
    n_t = min(cfg.sample_size, len(corpus_t))
    if n_s < cfg.sample_size or n_t < cfg.sample_size:
        logger.warning(f"Back-translation sample size {cfg.sample_size} clamped to {n_s}/{n_t}")

    initial_st, initial_ts = model_st.phrase_table, model_ts.phrase_table
    bleu_st, bleu_ts = _held_out_bleu(model_st, model_ts, held_out, beam_size, threads)
    history = [BacktransStep(step=0, bleu_st=bleu_st, bleu_ts=bleu_ts)]

    for step in range(1, cfg.steps + 1):
        sample_s, _ = sample_sentences(corpus_s, n_s, rng)
        sample_t, _ = sample_sentences(corpus_t, n_t, rng)

        synthetic_s = translate_corpus(sample_t, model_ts, beam_size, threads)
        synthetic_t = translate_corpus(sample_s, model_st, beam_size, threads)

        table_st = learn_phrase_table(synthetic_s, sample_t, cfg.em_iterations, cfg.max_phrase_len)
        table_ts = learn_phrase_table(synthetic_t, sample_s, cfg.em_iterations, cfg.max_phrase_len)
        if cfg.keep_induced_table:
            table_st = table_st.union(initial_st)
            table_ts = table_ts.union(initial_ts)

        model_st = model_st.with_table(table_st)
        model_ts = model_ts.with_table(table_ts)

        bleu_st, bleu_ts = _held_out_bleu(model_st, model_ts, held_out, beam_size, threads)
        history.append(BacktransStep(
            step=step,
            bleu_st=bleu_st,
            bleu_ts=bleu_ts,
            synthetic_pairs_st=len(synthetic_s),
            synthetic_pairs_ts=len(synthetic_t),
        ))
        logger.info(
            f"Back-translation step {step}: |PT s->t|={table_st.pair_count}, "
            f"|PT t->s|={table_ts.pair_count}, BLEU s->t={bleu_st}, t->s={bleu_ts}"
        )

    return BacktransResult(model_st=model_st, model_ts=model_ts, history=history)
