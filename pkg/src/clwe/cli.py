"""Command-line entry point: the full pipeline plus every stage as its own
subcommand."""

from __future__ import annotations

import argparse
import glob
import logging
import re
import sys
from dataclasses import fields

from . import align, ctx_align, embed_io, figures, pipeline, realloc, retrieval
from .corpus import replace_with_dictionary
from .dictionaries import load_dictionary, save_dictionary
from .sgns import TrainConfig

logger = logging.getLogger("clwe.cli")


def _add_pipeline_args(p):
    p.add_argument("--config", help="key = value config file; flags override it")
    for f in fields(pipeline.PipelineConfig):
        flag = "--" + f.name.replace("_", "-")
        if f.name == "eval_dicts":
            p.add_argument(flag, nargs="*", default=None, help="evaluation dictionaries")
        elif f.type == "bool" or isinstance(f.default, bool):
            p.add_argument(flag, default=None, action=argparse.BooleanOptionalAction)
        else:
            p.add_argument(flag, default=None)


def _pipeline_config(args) -> pipeline.PipelineConfig:
    values = pipeline.parse_config_file(args.config) if args.config else {}
    for f in fields(pipeline.PipelineConfig):
        given = getattr(args, f.name, None)
        if given is None:
            continue
        if isinstance(given, str):
            values[f.name] = pipeline._coerce(f.name, given)
        else:
            values[f.name] = given
    return pipeline.PipelineConfig(**values)


def cmd_pipeline(args) -> int:
    cfg = _pipeline_config(args)
    result = pipeline.run_pipeline(cfg)
    for name, report in result["reports"].items():
        print(f"{name}: {report.summary()}")
    return 0


def cmd_count(args) -> int:
    pipeline.stage_count(args.corpus, args.out, args.lowercase, args.min_count,
                         args.language or str(args.corpus))
    return 0


def cmd_joint_vocab(args) -> int:
    joint = pipeline.stage_joint_vocab(args.counts1, args.counts2, args.out,
                                       max_size=args.max_size)
    sizes = joint.class_sizes()
    logger.info("joint vocabulary: %d shared, %d l1-only, %d l2-only",
                sizes["shared"], sizes["l1"], sizes["l2"])
    return 0


def cmd_concat(args) -> int:
    pipeline.stage_concat(args.corpus1, args.corpus2, args.out, args.shuffle_seed)
    return 0


def cmd_train(args) -> int:
    cfg = TrainConfig(
        dim=args.dim, window=args.window, negatives=args.negatives,
        epochs=args.epochs, learning_rate=args.lr, subsample_t=args.subsample_t,
        min_count=args.min_count, seed=args.seed, mode=args.mode,
        lowercase=args.lowercase,
    )
    pipeline.stage_train(args.corpus, args.vocab, args.out, cfg)
    return 0


def cmd_normalize(args) -> int:
    pipeline.stage_normalize(args.embeddings, args.out, args.mode)
    return 0


def cmd_realloc(args) -> int:
    gammas = (
        [float(g) for g in args.gamma_sweep.split(",")]
        if args.gamma_sweep
        else [args.gamma]
    )
    sweep_counts = []
    for gamma in gammas:
        out = args.out
        if len(gammas) > 1:
            out = re.sub(r"(\.tsv)?$", f"_gamma{gamma:g}\\1", str(args.out), count=1)
        real = pipeline.stage_realloc(args.counts1, args.counts2, args.vocab, gamma, out)
        counts = {"shared": 0, "l1": 0, "l2": 0}
        for label in real.membership.values():
            counts[label] += 1
        sweep_counts.append(counts)
        logger.info("gamma %.4g: %d shared, %d l1, %d l2 -> %s",
                    gamma, counts["shared"], counts["l1"], counts["l2"], out)
    if len(gammas) > 1 and args.figures:
        figures.save_gamma_sweep_figure(gammas, sweep_counts, str(args.out) + ".png")
    return 0


def cmd_split(args) -> int:
    pipeline.stage_split(args.embeddings, args.report, args.out1, args.out2,
                         args.out_shared)
    return 0


def cmd_align(args) -> int:
    pipeline.stage_align_supervised(
        args.dict, args.src, args.tgt, args.report, args.solver, args.out_w,
        lowercase=args.lowercase,
    )
    return 0


def cmd_induce(args) -> int:
    src = embed_io.load_embeddings(args.src)
    tgt = embed_io.load_embeddings(args.tgt)
    induced = align.induce_dictionary(src, tgt, metric=args.metric, k=args.k,
                                      mutual=args.mutual, top_n=args.top_n)
    save_dictionary(induced, args.out)
    logger.info("induced %d pairs", len(induced))
    return 0


def cmd_refine(args) -> int:
    pipeline.stage_refine(
        args.src, args.tgt, args.iterations, args.metric, args.k, args.top_n,
        args.out_w, args.trace, render_figures=args.figures,
    )
    return 0


def cmd_apply(args) -> int:
    pipeline.stage_apply(args.w, args.src, args.fixed, args.shared, args.out)
    return 0


def cmd_eval_bli(args) -> int:
    surface_filter = "same_surface" if args.filter == "same-surface" else "none"
    report = pipeline.stage_eval_bli(
        args.dict, args.out, args.metric, args.k, args.policy, surface_filter,
        args.lowercase,
        aligned_vec=args.aligned, report_path=args.report,
        src_vec=args.src, tgt_vec=args.tgt,
    )
    print(report.summary())
    return 0


def cmd_pca(args) -> int:
    sets = [
        (embed_io.load_embeddings(path), label) for path, label in args.set
    ]
    rows = embed_io.pca_project(sets, dims=2)
    embed_io.write_pca_tsv(rows, args.out)
    if args.figures:
        figures.save_pca_figure(rows, str(args.out) + ".png")
    return 0


def cmd_replace(args) -> int:
    dictionary = load_dictionary(args.dict)
    replace_with_dictionary(args.corpus, dictionary, args.prob, args.seed, args.out)
    return 0


def cmd_ctx_pool(args) -> int:
    records = ctx_align.read_feature_file(args.features)
    pooled = ctx_align.pool_word_features(records, marker=args.marker)
    ctx_align.write_feature_file(pooled, args.out)
    logger.info("pooled %d subword records into %d word records",
                len(records), len(pooled))
    return 0


def cmd_ctx_parse(args) -> int:
    alignments = ctx_align.parse_word_alignments(args.alignments, args.src, args.tgt)
    with open(args.out, "w", encoding="utf-8", newline="\n") as f:
        for links in alignments.links:
            f.write(" ".join(f"{i}-{j}" for i, j in links) + "\n")
    logger.info("parsed %d sentences, dropped %d links",
                len(alignments.links), alignments.dropped)
    return 0


def cmd_ctx_learn(args) -> int:
    src_records = ctx_align.read_feature_file(args.src_features)
    tgt_records = ctx_align.read_feature_file(args.tgt_features)
    alignments = ctx_align.parse_word_alignments(args.alignments, args.src_sents,
                                                 args.tgt_sents)
    pairs = ctx_align.extract_aligned_features(
        src_records, tgt_records, alignments, first_link_only=args.first_link_only
    )
    matrices = ctx_align.learn_ctx_alignment(
        pairs, pair_cap=args.pair_cap, solver=args.solver, seed=args.seed
    )
    for layer, matrix in matrices.items():
        align.save_alignment(matrix, f"{args.out_prefix}.layer{layer}.txt")
    logger.info("learned %d per-layer matrices", len(matrices))
    return 0


def _load_layer_matrices(prefix: str) -> dict[int, align.AlignmentMatrix]:
    matrices = {}
    for path in glob.glob(f"{prefix}.layer*.txt"):
        match = re.search(r"\.layer(-?\d+)\.txt$", path)
        if match:
            matrices[int(match.group(1))] = align.load_alignment(path)
    if not matrices:
        raise ValueError(f"no matrices found for prefix {prefix!r}")
    return matrices


def cmd_ctx_apply(args) -> int:
    matrices = _load_layer_matrices(args.w_prefix)
    n = ctx_align.apply_ctx_alignment(matrices, args.features, args.out)
    logger.info("mapped %d records", n)
    return 0


def cmd_ctx_sum(args) -> int:
    records = []
    for path in args.features:
        records.extend(ctx_align.read_feature_file(path))
    summed = ctx_align.sum_layers(records, out_layer=args.out_layer)
    ctx_align.write_feature_file(summed, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clwe",
        description="Cross-lingual word embeddings: joint training, vocabulary "
                    "reallocation, alignment refinement, and BLI evaluation.",
    )
    parser.add_argument("--threads", type=int, default=None,
                        help="bound worker threads globally")
    parser.add_argument("--log-level", default="INFO")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("pipeline", help="run every stage end to end")
    _add_pipeline_args(p)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("count", help="count corpus tokens")
    p.add_argument("corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--lowercase", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--min-count", type=int, default=5)
    p.add_argument("--language")
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("joint-vocab", help="build the shared/exclusive vocabulary")
    p.add_argument("counts1")
    p.add_argument("counts2")
    p.add_argument("--out", required=True)
    p.add_argument("--max-size", type=int, default=None)
    p.set_defaults(func=cmd_joint_vocab)

    p = sub.add_parser("concat", help="concatenate two corpora")
    p.add_argument("corpus1")
    p.add_argument("corpus2")
    p.add_argument("--out", required=True)
    p.add_argument("--shuffle-seed", type=int, default=None)
    p.set_defaults(func=cmd_concat)

    p = sub.add_parser("train", help="train skip-gram embeddings")
    p.add_argument("corpus")
    p.add_argument("--vocab", required=True, help="vocabulary or joint-vocabulary TSV")
    p.add_argument("--out", required=True)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--window", type=int, default=5)
    p.add_argument("--negatives", type=int, default=5)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--subsample-t", type=float, default=1e-4)
    p.add_argument("--min-count", type=int, default=5)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--mode", choices=["deterministic_single", "parallel_lockfree"],
                   default="deterministic_single")
    p.add_argument("--lowercase", action=argparse.BooleanOptionalAction, default=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("normalize", help="normalize embedding rows")
    p.add_argument("embeddings")
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=["none", "unit", "center_unit"], default="unit")
    p.set_defaults(func=cmd_normalize)

    p = sub.add_parser("realloc", help="reallocate skewed shared tokens")
    p.add_argument("--counts1", required=True)
    p.add_argument("--counts2", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--gamma", type=float, default=0.9)
    p.add_argument("--gamma-sweep", help="comma-separated gammas, one report each")
    p.add_argument("--out", required=True)
    p.add_argument("--figures", action=argparse.BooleanOptionalAction, default=True)
    p.set_defaults(func=cmd_realloc)

    p = sub.add_parser("split", help="split embeddings by reallocated class")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--out1", required=True)
    p.add_argument("--out2", required=True)
    p.add_argument("--out-shared", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("align", help="solve a supervised alignment")
    p.add_argument("--dict", required=True)
    p.add_argument("--src", required=True)
    p.add_argument("--tgt", required=True, action="append",
                   help="target embedding file; repeat to merge several")
    p.add_argument("--report", help="reallocation report for the framework filter")
    p.add_argument("--solver", choices=["procrustes", "linear"], default="procrustes")
    p.add_argument("--out-w", required=True)
    p.add_argument("--lowercase", action=argparse.BooleanOptionalAction, default=False)
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("induce", help="induce a dictionary by retrieval")
    p.add_argument("--src", required=True)
    p.add_argument("--tgt", required=True)
    p.add_argument("--metric", choices=["csls", "cosine"], default="csls")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--mutual", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--top-n", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_induce)

    p = sub.add_parser("refine", help="unsupervised self-learning refinement")
    p.add_argument("--src", required=True)
    p.add_argument("--tgt", required=True, action="append")
    p.add_argument("--iterations", type=int, default=5)
    p.add_argument("--metric", choices=["csls", "cosine"], default="csls")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--top-n", type=int, default=None)
    p.add_argument("--out-w", required=True)
    p.add_argument("--trace", required=True)
    p.add_argument("--figures", action=argparse.BooleanOptionalAction, default=True)
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("apply", help="apply a map and merge the space")
    p.add_argument("--w", required=True)
    p.add_argument("--src", required=True, help="embeddings the map is applied to")
    p.add_argument("--fixed", required=True, help="embeddings passed through")
    p.add_argument("--shared", help="shared embeddings passed through")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_apply)

    p = sub.add_parser("eval-bli", help="precision@1 on a translation test set")
    p.add_argument("--dict", required=True)
    p.add_argument("--aligned", help="merged embedding file (needs --report)")
    p.add_argument("--report", help="reallocation report defining the two views")
    p.add_argument("--src", help="source embedding file")
    p.add_argument("--tgt", help="target embedding file")
    p.add_argument("--metric", choices=["csls", "cosine"], default="csls")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--policy", choices=["paper", "drop"], default="paper")
    p.add_argument("--filter", choices=["none", "same-surface"], default="none")
    p.add_argument("--lowercase", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--out", required=True, help="JSON report path")
    p.set_defaults(func=cmd_eval_bli)

    p = sub.add_parser("pca", help="2-D PCA export of labeled embedding sets")
    p.add_argument("--set", nargs=2, action="append", required=True,
                   metavar=("VEC", "LABEL"))
    p.add_argument("--out", required=True, help="TSV path (figure lands beside it)")
    p.add_argument("--figures", action=argparse.BooleanOptionalAction, default=True)
    p.set_defaults(func=cmd_pca)

    p = sub.add_parser("replace", help="pseudo-bilingual corpus by dictionary replacement")
    p.add_argument("corpus")
    p.add_argument("--dict", required=True)
    p.add_argument("--prob", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_replace)

    p = sub.add_parser("ctx-pool", help="pool subword features into word features")
    p.add_argument("--features", required=True)
    p.add_argument("--marker", default="##")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ctx_pool)

    p = sub.add_parser("ctx-parse", help="validate and clean word alignments")
    p.add_argument("--alignments", required=True)
    p.add_argument("--src", required=True)
    p.add_argument("--tgt", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ctx_parse)

    p = sub.add_parser("ctx-learn", help="learn per-layer feature alignments")
    p.add_argument("--src-features", required=True)
    p.add_argument("--tgt-features", required=True)
    p.add_argument("--alignments", required=True)
    p.add_argument("--src-sents", required=True)
    p.add_argument("--tgt-sents", required=True)
    p.add_argument("--solver", choices=["procrustes", "linear"], default="procrustes")
    p.add_argument("--pair-cap", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--first-link-only", action="store_true")
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_ctx_learn)

    p = sub.add_parser("ctx-apply", help="apply per-layer matrices to a feature file")
    p.add_argument("--features", required=True)
    p.add_argument("--w-prefix", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ctx_apply)

    p = sub.add_parser("ctx-sum", help="sum per-layer features per token")
    p.add_argument("--features", nargs="+", required=True)
    p.add_argument("--out-layer", type=int, default=-1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ctx_sum)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=getattr(logging, str(args.log_level).upper(), logging.INFO),
        format="[%(name)s] %(message)s",
    )
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    if args.threads is not None:
        import numba

        numba.set_num_threads(max(1, args.threads))
    try:
        return args.func(args)
    except (ValueError, OSError, pipeline.PipelineStageError) as exc:
        logger.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
