#!/usr/bin/env python3
"""
clwe CLI: corpus tools, embedding training, mapping, UMT, evaluation and the
end-to-end pipeline.

Usage:
    python -m clwe_cli synth-gen runs/data              # Synthetic language pair
    python -m clwe_cli train-embed src.txt src.vec      # SGNS embeddings
    python -m clwe_cli map src.vec trg.vec runs/map     # Unsupervised mapping
    python -m clwe_cli eval-bli src.vec trg.vec runs/map gold.tsv
    python -m clwe_cli pipeline --config run.yaml       # Full workflow
    python -m clwe_cli experiment --kind extension      # Controlled experiment

Global flags (--config, --seed, --threads, --out, --verbose) go before the
subcommand.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

from clwe_runtime._version import __version__
from clwe_runtime.config import PipelineConfig, load_settings, resolve_config
from clwe_runtime.errors import ClweError

logger = logging.getLogger("clwe_cli")


def _config(args) -> PipelineConfig:
    return resolve_config(args.config, seed=args.seed, threads=args.threads, out=args.out)


def _print_json(data) -> None:
    if hasattr(data, "model_dump_json"):
        print(data.model_dump_json(indent=2))
    else:
        print(json.dumps(data, indent=2, sort_keys=True))


def _normalized(path):
    from clwe_runtime.crossmap import normalize_for_mapping
    from clwe_runtime.embed import load_embeddings
    return normalize_for_mapping(load_embeddings(path))


def _umt_model(cfg: PipelineConfig, table_path, lm_path, source_language, target_language):
    from clwe_runtime.decoder import UmtModel
    from clwe_runtime.lm import load_arpa
    from clwe_runtime.phrase_table import read_phrase_table
    dec = cfg.umt.decoder
    return UmtModel(
        source_language=source_language,
        target_language=target_language,
        phrase_table=read_phrase_table(table_path),
        lm=load_arpa(lm_path),
        w_tm=dec.w_tm,
        w_lm=dec.w_lm,
        w_wp=dec.w_wp,
        max_phrase_len=dec.max_phrase_len,
        max_candidates=dec.max_candidates,
    )


# ---------------------------------------------------------------------------
# corpus
# ---------------------------------------------------------------------------

def cmd_tokenize(args):
    from clwe_runtime.corpus import tokenize_file
    n = tokenize_file(args.input, args.output, lowercase=not args.keep_case)
    print(f"Wrote {n} sentences to {args.output}")


def cmd_ttr(args):
    from clwe_runtime.corpus import corpus_statistics, read_corpus
    _print_json(corpus_statistics(read_corpus(args.corpus, args.lang)))


def cmd_augment(args):
    from clwe_runtime.corpus import concat_corpora, read_corpus, repeat_corpus, write_corpus
    original = read_corpus(args.original, "x")
    pseudo = read_corpus(args.pseudo, "x")
    out = write_corpus(concat_corpora(original, repeat_corpus(pseudo, args.weight)), args.output)
    print(f"Wrote {len(original) + args.weight * len(pseudo)} sentences to {out}")


def cmd_synth_gen(args):
    from clwe_runtime.corpus import write_corpus, write_word_pairs
    from clwe_runtime.synthetic import generate_synthetic_pair
    from models import Corpus

    cfg = _config(args)
    spec = cfg.synthetic.model_copy()
    if args.third:
        spec.third_language = True
    tags = (cfg.corpus.source_language, cfg.corpus.target_language, cfg.corpus.third_language)
    pair = generate_synthetic_pair(spec, language_tags=tags)
    out = Path(args.output)
    write_corpus(pair.corpus_a, out / f"{tags[0]}.txt")
    write_corpus(pair.corpus_b, out / f"{tags[1]}.txt")
    write_word_pairs(pair.gold_pairs, out / f"gold.{tags[0]}-{tags[1]}.tsv")
    if pair.held_out:
        write_corpus(Corpus(tuple(s for s, _ in pair.held_out), tags[0]), out / f"held_out.{tags[0]}.txt")
        write_corpus(Corpus(tuple(t for _, t in pair.held_out), tags[1]), out / f"held_out.{tags[1]}.txt")
    if pair.corpus_c is not None:
        write_corpus(pair.corpus_c, out / f"{tags[2]}.txt")
        write_word_pairs(pair.gold_pairs_ca, out / f"gold.{tags[2]}-{tags[0]}.tsv")
    print(f"Wrote synthetic corpora to {out}")


# ---------------------------------------------------------------------------
# embeddings and mapping
# ---------------------------------------------------------------------------

def cmd_train_embed(args):
    from clwe_runtime.corpus import build_vocabulary, read_corpus
    from clwe_runtime.embed import save_embeddings, train_sgns

    cfg = _config(args)
    corpus = read_corpus(args.corpus, args.lang, cfg.corpus.lowercase)
    vocab = build_vocabulary(corpus, cfg.embedding.min_count)
    out = save_embeddings(train_sgns(corpus, vocab, cfg.embedding), args.output)
    print(f"Wrote {len(vocab)} vectors to {out}")


def cmd_map(args):
    from clwe_runtime.corpus import read_word_pairs
    from clwe_runtime.crossmap import mean_objective, save_mapping, solve_mapping, unsupervised_map
    from models import BilingualDictionary, MappingResult

    cfg = _config(args)
    X, Y = _normalized(args.source), _normalized(args.target)
    if args.supervised:
        D, skipped = BilingualDictionary.from_word_pairs(read_word_pairs(args.supervised), X.vocab, Y.vocab)
        if skipped:
            logger.warning(f"Skipped {skipped} out-of-vocabulary dictionary pairs")
        mode = cfg.mapping.self_learn.mode
        W = solve_mapping(X.matrix, Y.matrix, D, mode)
        result = MappingResult(W=W, final_dictionary=D, objective_trace=[mean_objective(W, X.matrix, Y.matrix, D)],
                               converged=True, iterations=0, mode=mode)
    else:
        result = unsupervised_map(X.matrix, Y.matrix, cfg.mapping)
    _print_json(save_mapping(result, args.prefix, X.vocab, Y.vocab))


# ---------------------------------------------------------------------------
# UMT
# ---------------------------------------------------------------------------

def cmd_induce_pt(args):
    from clwe_runtime.crossmap import load_mapping
    from clwe_runtime.phrase_table import induce_phrase_table, write_phrase_table
    from models import MappingResult

    cfg = _config(args)
    X, Y = _normalized(args.source), _normalized(args.target)
    mapping = load_mapping(args.prefix, X.vocab, Y.vocab)
    if args.reverse:
        mapping = MappingResult(W=mapping.reverse_matrix(), final_dictionary=mapping.final_dictionary.inverted(),
                                mode=mapping.mode)
        X, Y = Y, X
    pi = cfg.umt.phrase_induction
    table = induce_phrase_table(mapping, X, Y, pi.top_phrases, pi.n_neighbors, pi.temperature, pi.retrieval, pi.csls_k)
    out = write_phrase_table(table, args.output)
    print(f"Wrote {table.pair_count} phrase pairs to {out}")


def cmd_train_lm(args):
    from clwe_runtime.corpus import read_corpus
    from clwe_runtime.lm import train_ngram_lm, write_arpa

    cfg = _config(args)
    order = args.order or cfg.umt.lm.order
    discount = cfg.umt.lm.discount if args.discount is None else args.discount
    lm = train_ngram_lm(read_corpus(args.corpus, args.lang, cfg.corpus.lowercase), order, discount)
    print(f"Wrote {order}-gram model to {write_arpa(lm, args.output)}")


def cmd_translate(args):
    from clwe_runtime.corpus import read_corpus, write_corpus
    from clwe_runtime.decoder import translate_corpus

    cfg = _config(args)
    model = _umt_model(cfg, args.phrase_table, args.lm, "source", "target")
    corpus = read_corpus(args.input, "source", cfg.corpus.lowercase)
    beam = args.beam or cfg.umt.decoder.beam_size
    out = write_corpus(translate_corpus(corpus, model, beam, cfg.umt.decoder.threads), args.output)
    print(f"Wrote {len(corpus)} translations to {out}")


def cmd_bt_refine(args):
    from clwe_runtime.back_translation import back_translate_refine
    from clwe_runtime.corpus import read_corpus
    from clwe_runtime.phrase_table import write_phrase_table

    cfg = _config(args)
    s, t = cfg.corpus.source_language, cfg.corpus.target_language
    lc = cfg.corpus.lowercase
    model_st = _umt_model(cfg, args.pt_st, args.lm_target, s, t)
    model_ts = _umt_model(cfg, args.pt_ts, args.lm_source, t, s)
    held_out = None
    if args.held_out_source and args.held_out_target:
        held_out = (read_corpus(args.held_out_source, s, lc), read_corpus(args.held_out_target, t, lc))
    result = back_translate_refine(
        model_st, model_ts,
        read_corpus(args.source, s, lc), read_corpus(args.target, t, lc),
        cfg.umt.backtrans, beam_size=cfg.umt.decoder.beam_size, threads=cfg.umt.decoder.threads, held_out=held_out,
    )
    out = Path(args.output)
    write_phrase_table(result.model_st.phrase_table, out / f"pt.{s}-{t}.tsv")
    write_phrase_table(result.model_ts.phrase_table, out / f"pt.{t}-{s}.tsv")
    _print_json([h.model_dump(mode="json") for h in result.history])


def cmd_bleu(args):
    from clwe_runtime.bleu import corpus_bleu
    from clwe_runtime.corpus import read_corpus
    _print_json(corpus_bleu(read_corpus(args.hypotheses, "x", False), read_corpus(args.references, "x", False), args.max_n))


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def cmd_eval_bli(args):
    from clwe_runtime.corpus import read_word_pairs
    from clwe_runtime.crossmap import load_mapping
    from clwe_runtime.evaluation import bli_evaluate

    cfg = _config(args)
    ev = cfg.evaluation
    X, Y = _normalized(args.source), _normalized(args.target)
    mapping = load_mapping(args.prefix, X.vocab, Y.vocab)
    W = mapping.W
    if args.reverse:
        X, Y, W = Y, X, mapping.reverse_matrix()
    report = bli_evaluate(W, X, Y, read_word_pairs(args.dictionary), ev.retrieval, ev.csls_k, ev.candidate_cutoff)
    _print_json({"mrr": report.mrr, "p_at_1": report.p_at_1, "queries": report.evaluated, "oov": report.oov_count})


def cmd_eval_eigsim(args):
    from clwe_runtime.structsim import eigenvector_similarity_report

    cfg = _config(args)
    es = cfg.eigsim
    _print_json(eigenvector_similarity_report(
        _normalized(args.x), _normalized(args.y),
        args.top_m or es.top_m, args.k_nn or es.k_nn, es.threshold, es.rule, es.combine,
    ))


def cmd_eval_wordsim(args):
    from clwe_runtime.embed import load_embeddings
    from clwe_runtime.evaluation import read_word_similarity, word_similarity_eval
    _print_json(word_similarity_eval(load_embeddings(args.embeddings), read_word_similarity(args.pairs)))


# ---------------------------------------------------------------------------
# pipeline
# ---------------------------------------------------------------------------

def cmd_pipeline(args):
    from clwe_runtime.pipeline import run_full_pipeline

    cfg = _config(args)
    if args.plan:
        cfg.augmentation = args.plan
    report = run_full_pipeline(cfg)
    for direction, bli in report.bli.items():
        print(f"{direction}: MRR={bli.mrr:.3f} P@1={bli.p_at_1:.3f}")
    print(f"Report: {Path(cfg.output_dir) / 'run_report.json'}")


def cmd_experiment(args):
    from clwe_runtime.experiments import EXPERIMENTS

    cfg = _config(args)
    report = EXPERIMENTS[args.kind](cfg)
    for row in report.rows:
        eig = f" eigsim={row.eigsim.eig_sim:.2f}" if row.eigsim else ""
        print(f"{row.label}: MRR={row.bli.mrr:.3f} P@1={row.bli.p_at_1:.3f}{eig}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clwe", description="Pseudo-corpus augmented cross-lingual embeddings")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", default=None, help="Pipeline YAML (default: packaged defaults)")
    parser.add_argument("--seed", type=int, default=None, help="Run seed for every stage")
    parser.add_argument("--threads", type=int, default=None, help="Worker threads (1 = deterministic)")
    parser.add_argument("--out", default=None, help="Output directory")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    subparsers = parser.add_subparsers(dest="command")

    p = subparsers.add_parser("tokenize", help="Normalize a raw text file")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--keep-case", action="store_true", help="Do not lowercase")
    p.set_defaults(func=cmd_tokenize)

    p = subparsers.add_parser("train-embed", help="Train SGNS embeddings on a corpus")
    p.add_argument("corpus")
    p.add_argument("output")
    p.add_argument("--lang", default="src")
    p.set_defaults(func=cmd_train_embed)

    p = subparsers.add_parser("map", help="Learn a cross-lingual mapping")
    p.add_argument("source", help="Source embeddings")
    p.add_argument("target", help="Target embeddings")
    p.add_argument("prefix", help="Output prefix for W, dictionary and metadata")
    p.add_argument("--supervised", default=None, help="Train on this dictionary instead of self-learning")
    p.set_defaults(func=cmd_map)

    p = subparsers.add_parser("induce-pt", help="Induce a unigram phrase table from a mapping")
    p.add_argument("source")
    p.add_argument("target")
    p.add_argument("prefix", help="Mapping prefix")
    p.add_argument("output")
    p.add_argument("--reverse", action="store_true", help="Induce the target-to-source table")
    p.set_defaults(func=cmd_induce_pt)

    p = subparsers.add_parser("train-lm", help="Train a Kneser-Ney n-gram model (ARPA output)")
    p.add_argument("corpus")
    p.add_argument("output")
    p.add_argument("--lang", default="trg")
    p.add_argument("--order", type=int, default=None)
    p.add_argument("--discount", type=float, default=None)
    p.set_defaults(func=cmd_train_lm)

    p = subparsers.add_parser("translate", help="Decode a corpus with a phrase table and LM")
    p.add_argument("phrase_table")
    p.add_argument("lm")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--beam", type=int, default=None)
    p.set_defaults(func=cmd_translate)

    p = subparsers.add_parser("bt-refine", help="Iterative back-translation")
    p.add_argument("source")
    p.add_argument("target")
    p.add_argument("pt_st", help="Source-to-target phrase table")
    p.add_argument("pt_ts", help="Target-to-source phrase table")
    p.add_argument("lm_source")
    p.add_argument("lm_target")
    p.add_argument("output", help="Directory for the refined tables")
    p.add_argument("--held-out-source", default=None)
    p.add_argument("--held-out-target", default=None)
    p.set_defaults(func=cmd_bt_refine)

    p = subparsers.add_parser("augment", help="Concatenate a corpus with a pseudo corpus")
    p.add_argument("original")
    p.add_argument("pseudo")
    p.add_argument("output")
    p.add_argument("--weight", type=int, default=1, help="Copies of the pseudo corpus")
    p.set_defaults(func=cmd_augment)

    p = subparsers.add_parser("eval-bli", help="MRR and P@1 of a mapping")
    p.add_argument("source")
    p.add_argument("target")
    p.add_argument("prefix", help="Mapping prefix")
    p.add_argument("dictionary", help="Test dictionary TSV")
    p.add_argument("--reverse", action="store_true", help="Evaluate target-to-source")
    p.set_defaults(func=cmd_eval_bli)

    p = subparsers.add_parser("eval-eigsim", help="Eigenvector similarity of two spaces")
    p.add_argument("x")
    p.add_argument("y")
    p.add_argument("--top-m", type=int, default=None)
    p.add_argument("--k-nn", type=int, default=None)
    p.set_defaults(func=cmd_eval_eigsim)

    p = subparsers.add_parser("eval-wordsim", help="Spearman correlation with human similarity scores")
    p.add_argument("embeddings")
    p.add_argument("pairs", help="TSV word1 word2 score")
    p.set_defaults(func=cmd_eval_wordsim)

    p = subparsers.add_parser("bleu", help="Corpus BLEU")
    p.add_argument("hypotheses")
    p.add_argument("references")
    p.add_argument("--max-n", type=int, default=4)
    p.set_defaults(func=cmd_bleu)

    p = subparsers.add_parser("ttr", help="Corpus statistics including type-token ratio")
    p.add_argument("corpus")
    p.add_argument("--lang", default="x")
    p.set_defaults(func=cmd_ttr)

    p = subparsers.add_parser("pipeline", help="Run the full workflow")
    p.add_argument("--plan", choices=["none", "src-only", "tgt-only", "both"], default=None)
    p.set_defaults(func=cmd_pipeline)

    p = subparsers.add_parser("experiment", help="Run a controlled experiment")
    p.add_argument("--kind", choices=["extension", "crosslanguage", "quality", "umt-init"], required=True)
    p.set_defaults(func=cmd_experiment)

    p = subparsers.add_parser("synth-gen", help="Generate a synthetic language pair")
    p.add_argument("output", help="Output directory")
    p.add_argument("--third", action="store_true", help="Also generate the unrelated third language")
    p.set_defaults(func=cmd_synth_gen)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    level = logging.DEBUG if args.verbose else getattr(logging, load_settings().log_level.upper(), logging.INFO)
    logging.basicConfig(level=level, format="%(asctime)s [%(levelname)s] %(message)s", stream=sys.stderr)

    if not hasattr(args, "func"):
        parser.print_help()
        return 0
    try:
        args.func(args)
    except ClweError as e:
        logger.error(str(e))
        print(f"ERROR: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
