"""
Controlled experiments built from PipelineRunner stages.

extension      baseline on Split A vs extending the source side with Split B
               raw text, with translated target Split B (non-parallel) or
               with translated target Split A (parallel)
crosslanguage  source extended with pseudo text translated from the target
               language vs from an unrelated third language
quality        pseudo-augmented mappings built from UMT models after
               0..steps back-translation steps
umt-init       back-translation BLEU for UMT initialized from the baseline
               vs the pseudo-augmented cross-lingual space
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

from clwe_runtime.config import PipelineConfig
from clwe_runtime.corpus import split_corpus, type_token_ratio
from clwe_runtime.errors import InvalidConfig
from clwe_runtime.evaluation import write_bli_table, write_report_json
from clwe_runtime.paths import ensure_dir
from clwe_runtime.pipeline import MappedSpaces, PipelineInputs, PipelineRunner, UmtPair
from clwe_runtime.stage_cache import RunLock
from models import Corpus, EmbeddingMatrix
from schemas import ComparativeReport, ExperimentRow

logger = logging.getLogger(__name__)

EXTENSION_MODES = ("none", "non_pseudo", "pseudo_nonparallel", "pseudo_parallel")
CROSSLANGUAGE_SOURCES = ("target", "third")


def _row(runner: PipelineRunner, label: str, spaces: MappedSpaces, inputs: PipelineInputs,
         source_corpus: Corpus, umt: Optional[UmtPair] = None) -> ExperimentRow:
    reports = runner.bli(spaces, inputs.test_pairs, inputs.reverse_test_pairs)
    forward = f"{runner.source_language}->{runner.target_language}"
    backward = f"{runner.target_language}->{runner.source_language}"
    if forward not in reports:
        raise InvalidConfig("experiments need a source->target test dictionary")
    row = ExperimentRow(
        label=label,
        bli=reports[forward],
        reverse_bli=reports.get(backward),
        eigsim=runner.eigsim(spaces),
        source_ttr=type_token_ratio(source_corpus),
    )
    if umt is not None:
        history = [h.bleu_st for h in umt.history if h.bleu_st is not None]
        row.bleu_history = history
        row.bleu = history[-1] if history else None
    logger.info(f"{label}: MRR={row.bli.mrr:.3f} P@1={row.bli.p_at_1:.3f} eigsim={row.eigsim.eig_sim:.2f}")
    return row


def _finish(runner: PipelineRunner, report: ComparativeReport) -> ComparativeReport:
    out = Path(runner.out_dir)
    runner.manifest[f"experiment.{report.kind}"] = str(write_report_json(report, out / f"experiment_{report.kind}.json"))
    rows = {}
    for r in report.rows:
        per_dir = {f"{runner.source_language}->{runner.target_language}": r.bli}
        if r.reverse_bli is not None:
            per_dir[f"{runner.target_language}->{runner.source_language}"] = r.reverse_bli
        rows[r.label] = per_dir
    write_bli_table(rows, out / f"experiment_{report.kind}.tsv")
    return report


def _modes(requested: Union[str, Sequence[str], None], allowed: Sequence[str]) -> List[str]:
    if requested is None:
        return list(allowed)
    modes = [requested] if isinstance(requested, str) else list(requested)
    unknown = [m for m in modes if m not in allowed]
    if unknown:
        raise ValueError(f"unknown mode(s) {unknown}; expected {list(allowed)}")
    return modes


def run_extension_experiment(
    cfg: PipelineConfig,
    mode: Union[str, Sequence[str], None] = None,
) -> ComparativeReport:
    """One row per requested mode; all modes share the Split A baseline."""
    modes = _modes(mode, EXTENSION_MODES)
    runner = PipelineRunner(cfg)
    report = ComparativeReport(kind="extension", seed=cfg.seed)
    ensure_dir(runner.out_dir)
    with RunLock(runner.out_dir):
        with runner.stage("corpora"):
            inputs = runner.load_inputs()
            src_a, src_b = split_corpus(inputs.source, 2)
            trg_a, trg_b = split_corpus(inputs.target, 2)
        with runner.stage("embed"):
            emb_src_a = runner.embed(src_a, "source_a")
            emb_trg_a = runner.embed(trg_a, "target_a")
        with runner.stage("map"):
            baseline = runner.map_spaces(emb_src_a, emb_trg_a, "split_a")

        umt = None
        if any(m.startswith("pseudo") for m in modes):
            with runner.stage("umt"):
                umt = runner.build_umt(src_a, trg_a, baseline, "split_a", inputs.held_out)

        for m in modes:
            if m == "none":
                report.rows.append(_row(runner, m, baseline, inputs, src_a))
                continue
            with runner.stage("augment"):
                if m == "non_pseudo":
                    extension = src_b
                elif m == "pseudo_nonparallel":
                    extension = runner.translate(umt.model_ts, trg_b, "pseudo_split_b")
                else:
                    extension = runner.translate(umt.model_ts, trg_a, "pseudo_split_a")
                extended = runner.augment(src_a, extension)
            with runner.stage("embed_augmented"):
                emb = runner.embed(extended, f"source_{m}")
            with runner.stage("map_augmented"):
                spaces = runner.map_spaces(emb, emb_trg_a, m)
            report.rows.append(_row(runner, m, spaces, inputs, extended))
    return _finish(runner, report)


def run_crosslanguage_experiment(
    cfg: PipelineConfig,
    pseudo_source_language: Union[str, Sequence[str], None] = None,
) -> ComparativeReport:
    """Baseline plus one row per pseudo-text origin ("target" and/or "third")."""
    origins = _modes(pseudo_source_language, CROSSLANGUAGE_SOURCES)
    runner = PipelineRunner(cfg)
    report = ComparativeReport(kind="crosslanguage", seed=cfg.seed)
    ensure_dir(runner.out_dir)
    with RunLock(runner.out_dir):
        with runner.stage("corpora"):
            inputs = runner.load_inputs(with_third=True)
        with runner.stage("embed"):
            emb_x = runner.embed(inputs.source, "source")
            emb_y = runner.embed(inputs.target, "target")
        with runner.stage("map"):
            baseline = runner.map_spaces(emb_x, emb_y, "baseline")
        report.rows.append(_row(runner, "baseline", baseline, inputs, inputs.source))

        for origin in origins:
            with runner.stage("umt"):
                if origin == "target":
                    umt = runner.build_umt(inputs.source, inputs.target, baseline, "target", inputs.held_out)
                    model, text = umt.model_ts, inputs.target
                else:
                    emb_z = runner.embed(inputs.third, "third")
                    third_spaces = runner.map_spaces(emb_z, emb_x, "third_to_source")
                    umt = runner.build_umt(inputs.third, inputs.source, third_spaces, "third")
                    model, text = umt.model_st, inputs.third
            with runner.stage("augment"):
                pseudo = runner.translate(model, text, f"pseudo_from_{origin}")
                extended = runner.augment(inputs.source, pseudo)
            with runner.stage("embed_augmented"):
                emb = runner.embed(extended, f"source_plus_{origin}")
            with runner.stage("map_augmented"):
                spaces = runner.map_spaces(emb, emb_y, f"plus_{origin}")
            report.rows.append(_row(runner, f"pseudo_from_{origin}", spaces, inputs, extended))
    return _finish(runner, report)


def _augment_by_plan(
    runner: PipelineRunner,
    inputs: PipelineInputs,
    umt: UmtPair,
    label: str,
    emb_x: EmbeddingMatrix,
    emb_y: EmbeddingMatrix,
) -> Tuple[Corpus, MappedSpaces]:
    plan = runner.cfg.augmentation if runner.cfg.augmentation != "none" else "src-only"
    source, target = inputs.source, inputs.target
    if plan in ("src-only", "both"):
        source = runner.augment(source, runner.translate(umt.model_ts, inputs.target, f"pseudo_source_{label}"))
        emb_x = runner.embed(source, f"source_{label}")
    if plan in ("tgt-only", "both"):
        target = runner.augment(target, runner.translate(umt.model_st, inputs.source, f"pseudo_target_{label}"))
        emb_y = runner.embed(target, f"target_{label}")
    return source, runner.map_spaces(emb_x, emb_y, label)


def run_quality_experiment(cfg: PipelineConfig, steps: Optional[int] = None) -> ComparativeReport:
    """BLI of pseudo-augmented mappings from UMT after 0..steps back-translation steps.

    A plan of "none" is treated as "src-only".
    """
    max_steps = cfg.umt.backtrans.steps if steps is None else steps
    runner = PipelineRunner(cfg)
    report = ComparativeReport(kind="quality", seed=cfg.seed)
    ensure_dir(runner.out_dir)
    with RunLock(runner.out_dir):
        with runner.stage("corpora"):
            inputs = runner.load_inputs()
        with runner.stage("embed"):
            emb_x = runner.embed(inputs.source, "source")
            emb_y = runner.embed(inputs.target, "target")
        with runner.stage("map"):
            baseline = runner.map_spaces(emb_x, emb_y, "baseline")

        for s in range(max_steps + 1):
            umt_cfg = cfg.umt.model_copy(deep=True)
            umt_cfg.backtrans.steps = s
            with runner.stage("umt"):
                umt = runner.build_umt(inputs.source, inputs.target, baseline, f"bt{s}", inputs.held_out, umt_cfg)
            with runner.stage("augment"):
                source, spaces = _augment_by_plan(runner, inputs, umt, f"bt{s}", emb_x, emb_y)
            report.rows.append(_row(runner, f"bt{s}", spaces, inputs, source, umt))
    return _finish(runner, report)


def run_umt_init_experiment(cfg: PipelineConfig) -> ComparativeReport:
    """Held-out BLEU per back-translation step for two initializations of UMT."""
    runner = PipelineRunner(cfg)
    report = ComparativeReport(kind="umt-init", seed=cfg.seed)
    ensure_dir(runner.out_dir)
    with RunLock(runner.out_dir):
        with runner.stage("corpora"):
            inputs = runner.load_inputs()
        with runner.stage("embed"):
            emb_x = runner.embed(inputs.source, "source")
            emb_y = runner.embed(inputs.target, "target")
        with runner.stage("map"):
            baseline = runner.map_spaces(emb_x, emb_y, "baseline")
        with runner.stage("umt"):
            umt_base = runner.build_umt(inputs.source, inputs.target, baseline, "baseline_init", inputs.held_out)
        report.rows.append(_row(runner, "baseline_init", baseline, inputs, inputs.source, umt_base))

        with runner.stage("augment"):
            source, spaces = _augment_by_plan(runner, inputs, umt_base, "augmented", emb_x, emb_y)
        with runner.stage("umt"):
            # only the initial phrase tables come from the augmented space; LMs and back-translation use the original corpora
            umt_aug = runner.build_umt(inputs.source, inputs.target, spaces, "pseudo_init", inputs.held_out)
        report.rows.append(_row(runner, "pseudo_init", spaces, inputs, source, umt_aug))
    return _finish(runner, report)


EXPERIMENTS = {
    "extension": run_extension_experiment,
    "crosslanguage": run_crosslanguage_experiment,
    "quality": run_quality_experiment,
    "umt-init": run_umt_init_experiment,
}
