"""
End-to-end orchestration.

    corpora -> embed -> map -> umt -> augment -> embed_augmented -> map_augmented -> evaluate

The umt, augment and *_augmented stages are skipped when the augmentation
plan is "none". Trained artifacts go through the stage cache and are always
read back from disk before use, so a cached rerun sees exactly the values a
fresh run saw.
"""

from __future__ import annotations

import json
import logging
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from clwe_runtime.back_translation import back_translate_refine
from clwe_runtime.config import PipelineConfig, UmtConfig, save_config
from clwe_runtime.corpus import (
    build_vocabulary,
    concat_corpora,
    read_corpus,
    read_word_pairs,
    repeat_corpus,
    type_token_ratio,
    write_corpus,
)
from clwe_runtime.crossmap import load_mapping, normalize_for_mapping, save_mapping, unsupervised_map
from clwe_runtime.decoder import UmtModel, translate_corpus
from clwe_runtime.embed import load_embeddings, save_embeddings, train_sgns
from clwe_runtime.errors import InvalidConfig, StageError
from clwe_runtime.evaluation import (
    bli_evaluate,
    read_word_similarity,
    word_similarity_eval,
    write_bli_table,
    write_report_json,
)
from clwe_runtime.lm import load_arpa, train_ngram_lm, write_arpa
from clwe_runtime.paths import default_cache_dir, ensure_dir
from clwe_runtime.phrase_table import induce_phrase_table, read_phrase_table, write_phrase_table
from clwe_runtime.stage_cache import RunLock, StageCache, hash_array, hash_corpus, hash_embeddings
from clwe_runtime.structsim import eigenvector_similarity_report
from clwe_runtime.synthetic import generate_synthetic_pair
from models import Corpus, EmbeddingMatrix, MappingResult
from schemas import BacktransStep, BliReport, EigsimReport, RunReport, WordSimReport

logger = logging.getLogger(__name__)

WordPairs = List[Tuple[str, str]]


@dataclass
class PipelineInputs:
    source: Corpus
    target: Corpus
    third: Optional[Corpus] = None
    test_pairs: WordPairs = field(default_factory=list)
    reverse_test_pairs: WordPairs = field(default_factory=list)
    held_out: Optional[Tuple[Corpus, Corpus]] = None


@dataclass
class MappedSpaces:
    """Normalized source and target embeddings with the mapping between them."""
    mapping: MappingResult
    source: EmbeddingMatrix
    target: EmbeddingMatrix

    def reversed(self) -> MappingResult:
        m = self.mapping
        return MappingResult(
            W=m.reverse_matrix(),
            final_dictionary=m.final_dictionary.inverted(),
            objective_trace=list(m.objective_trace),
            converged=m.converged,
            iterations=m.iterations,
            mode=m.mode,
        )


@dataclass
class UmtPair:
    model_st: UmtModel
    model_ts: UmtModel
    history: List[BacktransStep] = field(default_factory=list)


def _top_ranked(pairs: WordPairs, corpus: Corpus, top: int) -> WordPairs:
    ranked = build_vocabulary(corpus).words[:top]
    keep = set(ranked)
    return [(s, t) for s, t in pairs if s in keep]


def generate_pseudo_corpus(
    model: UmtModel,
    corpus: Corpus,
    beam_size: Optional[int] = 10,
    threads: int = 1,
) -> Corpus:
    """Translate every sentence of `corpus`; the result is in the model's target language."""
    return translate_corpus(corpus, model, beam_size=beam_size, threads=threads)


class PipelineRunner:
    STAGES = ("corpora", "embed", "map", "umt", "augment", "embed_augmented", "map_augmented", "evaluate")

    def __init__(self, cfg: PipelineConfig, cache: Optional[StageCache] = None):
        self.cfg = cfg
        self.out_dir = Path(cfg.output_dir)
        self.cache = cache or StageCache(cfg.cache_dir or default_cache_dir(self.out_dir))
        self.manifest: Dict[str, str] = {}
        self.timings: Dict[str, float] = {}

    @property
    def source_language(self) -> str:
        return self.cfg.corpus.source_language

    @property
    def target_language(self) -> str:
        return self.cfg.corpus.target_language

    @contextmanager
    def stage(self, name: str):
        start = time.perf_counter()
        logger.info(f"Stage '{name}' started")
        try:
            yield
        except StageError:
            raise
        except Exception as e:
            logger.error(f"Stage '{name}' failed: {e}")
            raise StageError(name, e, dict(self.manifest)) from e
        finally:
            self.timings[name] = self.timings.get(name, 0.0) + time.perf_counter() - start
        logger.info(f"Stage '{name}' finished in {self.timings[name]:.2f}s")

    # ------------------------------------------------------------------
    # building blocks
    # ------------------------------------------------------------------

    def load_inputs(self, with_third: bool = False) -> PipelineInputs:
        cfg = self.cfg
        tags = (cfg.corpus.source_language, cfg.corpus.target_language, cfg.corpus.third_language)
        ensure_dir(self.out_dir / "corpora")

        if cfg.uses_synthetic:
            spec = cfg.synthetic.model_copy()
            if with_third:
                spec.third_language = True
            pair = generate_synthetic_pair(spec, language_tags=tags)
            inputs = PipelineInputs(
                source=pair.corpus_a,
                target=pair.corpus_b,
                third=pair.corpus_c,
                test_pairs=_top_ranked(pair.gold_pairs, pair.corpus_a, cfg.evaluation.synthetic_test_top),
                reverse_test_pairs=_top_ranked(
                    [(t, s) for s, t in pair.gold_pairs], pair.corpus_b, cfg.evaluation.synthetic_test_top
                ),
            )
            if pair.held_out:
                inputs.held_out = (
                    Corpus(tuple(s for s, _ in pair.held_out), tags[0]),
                    Corpus(tuple(t for _, t in pair.held_out), tags[1]),
                )
        else:
            lc = cfg.corpus.lowercase
            inputs = PipelineInputs(
                source=read_corpus(cfg.corpus.source_path, tags[0], lc),
                target=read_corpus(cfg.corpus.target_path, tags[1], lc),
            )
            if cfg.corpus.third_path:
                inputs.third = read_corpus(cfg.corpus.third_path, tags[2], lc)
            if cfg.evaluation.test_dictionary:
                inputs.test_pairs = read_word_pairs(cfg.evaluation.test_dictionary)
            if cfg.evaluation.reverse_test_dictionary:
                inputs.reverse_test_pairs = read_word_pairs(cfg.evaluation.reverse_test_dictionary)
            else:
                inputs.reverse_test_pairs = [(t, s) for s, t in inputs.test_pairs]

        if with_third and inputs.third is None:
            raise InvalidConfig("a third-language corpus is required (corpus.third_path or synthetic)")

        for name, corpus in (("source", inputs.source), ("target", inputs.target), ("third", inputs.third)):
            if corpus is not None:
                path = write_corpus(corpus, self.out_dir / "corpora" / f"{corpus.language_tag}.txt")
                self.manifest[f"corpus.{name}"] = str(path)
        return inputs

    def embed(self, corpus: Corpus, label: str) -> EmbeddingMatrix:
        key = self.cache.key("embed", self.cfg.embedding, [hash_corpus(corpus)])
        entry = self.cache.lookup("embed", key)
        if entry is None:
            entry = self.cache.begin("embed", key)
            vocab = build_vocabulary(corpus, self.cfg.embedding.min_count)
            save_embeddings(train_sgns(corpus, vocab, self.cfg.embedding), entry / "vectors.txt")
            self.cache.commit(entry)
        path = entry / "vectors.txt"
        self.manifest[f"embeddings.{label}"] = str(path)
        return load_embeddings(path)

    def map_spaces(self, emb_x: EmbeddingMatrix, emb_y: EmbeddingMatrix, label: str) -> MappedSpaces:
        X = normalize_for_mapping(emb_x)
        Y = normalize_for_mapping(emb_y)
        key = self.cache.key("map", self.cfg.mapping, [hash_embeddings(X), hash_embeddings(Y)])
        entry = self.cache.lookup("map", key)
        if entry is None:
            entry = self.cache.begin("map", key)
            result = unsupervised_map(X.matrix, Y.matrix, self.cfg.mapping)
            save_mapping(result, entry / "mapping", X.vocab, Y.vocab)
            self.cache.commit(entry)
        self.manifest[f"mapping.{label}"] = str(entry / "mapping.W.txt")
        self.manifest[f"dictionary.{label}"] = str(entry / "mapping.dict.tsv")
        return MappedSpaces(load_mapping(entry / "mapping", X.vocab, Y.vocab), X, Y)

    def _umt_model(self, source_language: str, target_language: str, table, lm, umt: UmtConfig) -> UmtModel:
        dec = umt.decoder
        return UmtModel(
            source_language=source_language,
            target_language=target_language,
            phrase_table=table,
            lm=lm,
            w_tm=dec.w_tm,
            w_lm=dec.w_lm,
            w_wp=dec.w_wp,
            max_phrase_len=dec.max_phrase_len,
            max_candidates=dec.max_candidates,
        )

    def build_umt(
        self,
        source: Corpus,
        target: Corpus,
        spaces: MappedSpaces,
        label: str,
        held_out: Optional[Tuple[Corpus, Corpus]] = None,
        umt_cfg: Optional[UmtConfig] = None,
    ) -> UmtPair:
        """Both translation directions between `source` and `target`, refined by back-translation."""
        umt = umt_cfg or self.cfg.umt
        s_lang, t_lang = source.language_tag, target.language_tag
        inputs = [
            hash_corpus(source), hash_corpus(target),
            hash_embeddings(spaces.source), hash_embeddings(spaces.target), hash_array(spaces.mapping.W),
        ]
        if held_out is not None:
            inputs += [hash_corpus(held_out[0]), hash_corpus(held_out[1])]
        # thread count does not change the models
        key = self.cache.key("umt", umt.model_dump(mode="json", exclude={"decoder": {"threads"}}), inputs)
        entry = self.cache.lookup("umt", key)

        if entry is None:
            entry = self.cache.begin("umt", key)
            lm_t = load_arpa(write_arpa(train_ngram_lm(target, umt.lm.order, umt.lm.discount), entry / "lm.target.arpa"))
            lm_s = load_arpa(write_arpa(train_ngram_lm(source, umt.lm.order, umt.lm.discount), entry / "lm.source.arpa"))

            pi = umt.phrase_induction
            induced_st = induce_phrase_table(
                spaces.mapping, spaces.source, spaces.target,
                pi.top_phrases, pi.n_neighbors, pi.temperature, pi.retrieval, pi.csls_k,
            )
            induced_ts = induce_phrase_table(
                spaces.reversed(), spaces.target, spaces.source,
                pi.top_phrases, pi.n_neighbors, pi.temperature, pi.retrieval, pi.csls_k,
            )
            induced_st = read_phrase_table(write_phrase_table(induced_st, entry / "pt.induced.st.tsv"))
            induced_ts = read_phrase_table(write_phrase_table(induced_ts, entry / "pt.induced.ts.tsv"))

            result = back_translate_refine(
                self._umt_model(s_lang, t_lang, induced_st, lm_t, umt),
                self._umt_model(t_lang, s_lang, induced_ts, lm_s, umt),
                source, target, umt.backtrans,
                beam_size=umt.decoder.beam_size,
                threads=umt.decoder.threads,
                held_out=held_out,
            )
            write_phrase_table(result.model_st.phrase_table, entry / "pt.st.tsv")
            write_phrase_table(result.model_ts.phrase_table, entry / "pt.ts.tsv")
            with open(entry / "backtrans.json", "w", encoding="utf-8") as f:
                json.dump([h.model_dump(mode="json") for h in result.history], f, indent=2, sort_keys=True)
            self.cache.commit(entry)

        for name in ("lm.target.arpa", "lm.source.arpa", "pt.st.tsv", "pt.ts.tsv", "backtrans.json"):
            self.manifest[f"umt.{label}.{name}"] = str(entry / name)
        with open(entry / "backtrans.json", "r", encoding="utf-8") as f:
            history = [BacktransStep(**h) for h in json.load(f)]
        return UmtPair(
            model_st=self._umt_model(s_lang, t_lang, read_phrase_table(entry / "pt.st.tsv"),
                                     load_arpa(entry / "lm.target.arpa"), umt),
            model_ts=self._umt_model(t_lang, s_lang, read_phrase_table(entry / "pt.ts.tsv"),
                                     load_arpa(entry / "lm.source.arpa"), umt),
            history=history,
        )

    def translate(self, model: UmtModel, corpus: Corpus, label: str) -> Corpus:
        pseudo = generate_pseudo_corpus(model, corpus, self.cfg.umt.decoder.beam_size,
                                        self.cfg.umt.decoder.threads)
        path = write_corpus(pseudo, self.out_dir / "pseudo" / f"{label}.txt")
        self.manifest[f"pseudo.{label}"] = str(path)
        return pseudo

    def augment(self, original: Corpus, pseudo: Corpus) -> Corpus:
        return concat_corpora(original, repeat_corpus(pseudo, self.cfg.pseudo_weight))

    def bli(self, spaces: MappedSpaces, test_pairs: WordPairs, reverse_pairs: WordPairs) -> Dict[str, BliReport]:
        ev = self.cfg.evaluation
        reports: Dict[str, BliReport] = {}
        if test_pairs:
            reports[f"{self.source_language}->{self.target_language}"] = bli_evaluate(
                spaces.mapping.W, spaces.source, spaces.target, test_pairs,
                ev.retrieval, ev.csls_k, ev.candidate_cutoff,
            )
        if reverse_pairs:
            reports[f"{self.target_language}->{self.source_language}"] = bli_evaluate(
                spaces.mapping.reverse_matrix(), spaces.target, spaces.source, reverse_pairs,
                ev.retrieval, ev.csls_k, ev.candidate_cutoff,
            )
        return reports

    def eigsim(self, spaces: MappedSpaces) -> EigsimReport:
        es = self.cfg.eigsim
        top_m = min(es.top_m, len(spaces.source), len(spaces.target))
        k_nn = min(es.k_nn, top_m - 1)
        if top_m < es.top_m or k_nn < es.k_nn:
            logger.warning(f"Eigenvector similarity clamped to top_m={top_m}, k_nn={k_nn}")
        return eigenvector_similarity_report(
            spaces.source, spaces.target, top_m, k_nn, es.threshold, es.rule, es.combine,
        )

    def wordsim(self, emb: EmbeddingMatrix, path: Optional[str]) -> Optional[WordSimReport]:
        if not path:
            return None
        return word_similarity_eval(emb, read_word_similarity(path))

    # ------------------------------------------------------------------
    # full run
    # ------------------------------------------------------------------

    def run(self) -> RunReport:
        cfg = self.cfg
        plan = cfg.augmentation
        ensure_dir(self.out_dir)
        with RunLock(self.out_dir):
            self.manifest["config"] = str(save_config(cfg, self.out_dir / "config.yaml"))

            with self.stage("corpora"):
                inputs = self.load_inputs()
            with self.stage("embed"):
                emb_x = self.embed(inputs.source, "source")
                emb_y = self.embed(inputs.target, "target")
            with self.stage("map"):
                baseline = self.map_spaces(emb_x, emb_y, "baseline")

            augmented = None
            umt: Optional[UmtPair] = None
            pseudo: Dict[str, Corpus] = {}
            aug_x, aug_y = emb_x, emb_y
            if plan != "none":
                with self.stage("umt"):
                    umt = self.build_umt(inputs.source, inputs.target, baseline, "main", inputs.held_out)
                with self.stage("augment"):
                    if plan in ("src-only", "both"):
                        pseudo["source"] = self.translate(umt.model_ts, inputs.target, "pseudo_source")
                    if plan in ("tgt-only", "both"):
                        pseudo["target"] = self.translate(umt.model_st, inputs.source, "pseudo_target")
                with self.stage("embed_augmented"):
                    if "source" in pseudo:
                        aug_x = self.embed(self.augment(inputs.source, pseudo["source"]), "source_augmented")
                    if "target" in pseudo:
                        aug_y = self.embed(self.augment(inputs.target, pseudo["target"]), "target_augmented")
                with self.stage("map_augmented"):
                    augmented = self.map_spaces(aug_x, aug_y, "augmented")

            with self.stage("evaluate"):
                report = self._evaluate(inputs, baseline, augmented, emb_x, emb_y, aug_x, aug_y, umt, pseudo)

            self.manifest["bli_table"] = str(write_bli_table(self._table_rows(report), self.out_dir / "bli_table.tsv"))
            report.artifacts = dict(self.manifest)
            report.timings = dict(self.timings)
            write_report_json(report, self.out_dir / "run_report.json")
        logger.info(f"Run report written to {self.out_dir / 'run_report.json'}")
        return report

    def _evaluate(self, inputs, baseline, augmented, emb_x, emb_y, aug_x, aug_y, umt, pseudo) -> RunReport:
        cfg = self.cfg
        ev = cfg.evaluation
        final = augmented or baseline
        report = RunReport(plan=cfg.augmentation, seed=cfg.seed)
        report.bli = self.bli(final, inputs.test_pairs, inputs.reverse_test_pairs)
        report.eigsim = self.eigsim(final)
        if augmented is not None:
            report.bli_baseline = self.bli(baseline, inputs.test_pairs, inputs.reverse_test_pairs)
            report.eigsim_baseline = self.eigsim(baseline)

        report.ttr = {
            self.source_language: type_token_ratio(inputs.source),
            self.target_language: type_token_ratio(inputs.target),
        }
        for side, corpus in pseudo.items():
            report.ttr[f"pseudo_{corpus.language_tag}"] = type_token_ratio(corpus)
            report.pseudo_corpora.append(self.manifest[f"pseudo.pseudo_{side}"])
        if umt is not None:
            report.backtrans = umt.history

        for lang, emb, aug, path in (
            (self.source_language, emb_x, aug_x, ev.wordsim_source),
            (self.target_language, emb_y, aug_y, ev.wordsim_target),
        ):
            ws = self.wordsim(emb, path)
            if ws is not None:
                report.wordsim[lang] = ws
                if aug is not emb:
                    report.wordsim[f"{lang}+pseudo"] = self.wordsim(aug, path)
        return report

    def _table_rows(self, report: RunReport) -> Dict[str, Dict[str, BliReport]]:
        rows = {}
        if report.bli_baseline:
            rows["mapping"] = report.bli_baseline
            rows[f"mapping (+ pseudo, {report.plan})"] = report.bli
        else:
            rows["mapping"] = report.bli
        return rows


def run_full_pipeline(cfg: PipelineConfig) -> RunReport:
    return PipelineRunner(cfg).run()
