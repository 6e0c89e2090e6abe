"""End-to-end orchestration: every stage reads and writes on-disk artifacts,
so a full run is byte-identical to invoking the stages one by one with the
same seeds. All randomness derives from one root seed, salted per stage."""

from __future__ import annotations

import hashlib
import logging
from contextlib import contextmanager
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import align, corpus, embed_io, figures, realloc, retrieval, sgns
from .dictionaries import load_dictionary

logger = logging.getLogger("clwe.pipeline")

GAMMA_GRID = (0.7, 0.8, 0.9, 0.95)


class PipelineStageError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage


def stage_seed(root_seed: int, stage: str) -> int:
    """Derive a per-stage seed from the root seed, stable across runs."""
    digest = hashlib.sha256(f"{root_seed}:{stage}".encode()).digest()
    return int.from_bytes(digest[:8], "big") & (2**63 - 1)


@dataclass
class PipelineConfig:
    corpus1: str = ""
    corpus2: str = ""
    out_dir: str = "out"
    lowercase: bool = True
    min_count: int = 5
    max_vocab: int | None = None
    dim: int = 64
    window: int = 5
    negatives: int = 5
    epochs: int = 5
    learning_rate: float = 0.05
    subsample_t: float = 1e-4
    mode: str = "deterministic_single"
    seed: int = 1
    shuffle: bool = True
    normalize: str = "unit"
    gamma: float = 0.9
    align_mode: str = "unsupervised"
    seed_dict: str | None = None
    solver: str = "procrustes"
    refine_iterations: int = 5
    csls_k: int = 10
    induce_top_n: int | None = None
    eval_dicts: list[str] = field(default_factory=list)
    eval_metric: str = "csls"
    eval_policy: str = "paper"
    eval_filter: str = "none"
    figures: bool = True

    def validate(self) -> None:
        for path in [self.corpus1, self.corpus2, *self.eval_dicts]:
            if not path or not Path(path).exists():
                raise ValueError(f"input path does not exist: {path!r}")
        if not 0.5 < self.gamma < 1.0:
            raise ValueError(f"gamma must be in (0.5, 1), got {self.gamma}")
        if not any(abs(self.gamma - g) < 1e-12 for g in GAMMA_GRID):
            logger.warning(
                "gamma %.4g is outside the usual grid %s", self.gamma, GAMMA_GRID
            )
        if self.align_mode not in ("supervised", "unsupervised"):
            raise ValueError(f"unknown alignment mode {self.align_mode!r}")
        if self.align_mode == "supervised" and not self.seed_dict:
            raise ValueError("supervised alignment requires a seed dictionary")
        if self.align_mode == "supervised" and not Path(self.seed_dict).exists():
            raise ValueError(f"seed dictionary does not exist: {self.seed_dict!r}")
        if self.normalize not in ("none", "unit", "center_unit"):
            raise ValueError(f"unknown normalization mode {self.normalize!r}")


def parse_config_file(path) -> dict:
    """Read `key = value` lines; types are inferred from PipelineConfig."""
    types = {f.name: f.type for f in fields(PipelineConfig)}
    values: dict = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}: line {lineno}: expected 'key = value'")
            key, raw = (part.strip() for part in line.split("=", 1))
            if key not in types:
                raise ValueError(f"{path}: line {lineno}: unknown key {key!r}")
            values[key] = _coerce(key, raw)
    return values


def _coerce(key: str, raw: str):
    if key == "eval_dicts":
        return [p.strip() for p in raw.split(",") if p.strip()]
    if key in ("max_vocab", "induce_top_n", "seed_dict"):
        if raw.lower() in ("none", ""):
            return None
        return int(raw) if key != "seed_dict" else raw
    default = getattr(PipelineConfig(), key)
    if isinstance(default, bool):
        if raw.lower() in ("true", "1", "yes", "on"):
            return True
        if raw.lower() in ("false", "0", "no", "off"):
            return False
        raise ValueError(f"cannot parse boolean {raw!r} for {key}")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw


@contextmanager
def _stage(name: str, outputs: list):
    logger.info("stage %s", name)
    try:
        yield
    except Exception as exc:
        for out in outputs:
            Path(out).unlink(missing_ok=True)
        raise PipelineStageError(name, exc) from exc


def merge_sets(*parts: embed_io.EmbeddingSet) -> embed_io.EmbeddingSet:
    """Disjoint union of embedding sets, rows unchanged."""
    tokens: list[str] = []
    seen: set[str] = set()
    for part in parts:
        for token in part.vocab.tokens:
            if token in seen:
                raise ValueError(f"token {token!r} appears in more than one set")
            seen.add(token)
            tokens.append(token)
    matrix = np.vstack([p.matrix for p in parts]) if parts else np.zeros((0, 0))
    return embed_io.EmbeddingSet(embed_io.Vocabulary(tokens), matrix)


# ---------------------------------------------------------------------------
# stage implementations shared by the CLI subcommands and the full pipeline


def stage_count(corpus_path, out, lowercase: bool, min_count: int, language: str):
    stats = corpus.count_tokens(corpus_path, lowercase=lowercase,
                                min_count=min_count, language=language)
    corpus.write_counts(stats, out)
    return stats


def stage_joint_vocab(counts1, counts2, out, max_size: int | None = None):
    stats1 = corpus.read_counts(counts1, language="l1")
    stats2 = corpus.read_counts(counts2, language="l2")
    joint = corpus.build_joint_vocab(stats1, stats2, max_size=max_size)
    corpus.write_joint_vocab(joint, out)
    return joint


def stage_concat(corpus1, corpus2, out, shuffle_seed: int | None):
    corpus.concat_corpora(corpus1, corpus2, out, shuffle_seed=shuffle_seed)


def stage_train(corpus_path, vocab_path, out, config: sgns.TrainConfig):
    tokens = []
    with open(vocab_path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                tokens.append(line.split("\t")[0].rstrip("\n"))
    emb = sgns.train_sgns(corpus_path, embed_io.Vocabulary(tokens), config)
    embed_io.save_embeddings(emb, out)
    return emb


def stage_normalize(in_vec, out_vec, mode: str):
    emb = embed_io.load_embeddings(in_vec)
    embed_io.save_embeddings(embed_io.normalize(emb, mode), out_vec)


def stage_realloc(counts1, counts2, vocab_path, gamma: float, out_report):
    stats1 = corpus.read_counts(counts1, language="l1")
    stats2 = corpus.read_counts(counts2, language="l2")
    joint = corpus.read_joint_vocab(vocab_path, stats1, stats2)
    real = realloc.reallocate(joint, stats1, stats2, gamma)
    realloc.write_realloc_report(real, joint, out_report)
    return real


def stage_split(vec_path, report_path, out1, out2, out_shared):
    emb = embed_io.load_embeddings(vec_path)
    real = realloc.read_realloc_report(report_path)
    e1, e2, es = realloc.split_embeddings(emb, real)
    embed_io.save_embeddings(e1, out1)
    embed_io.save_embeddings(e2, out2)
    embed_io.save_embeddings(es, out_shared)


def stage_align_supervised(
    dict_path, src_vec, tgt_vecs: list, report_path, solver: str, out_w,
    lowercase: bool = False,
):
    source = embed_io.load_embeddings(src_vec)
    target = merge_sets(*[embed_io.load_embeddings(p) for p in tgt_vecs])
    dictionary = load_dictionary(dict_path, lowercase=lowercase)
    if report_path is not None:
        real = realloc.read_realloc_report(report_path)
        dictionary = align.filter_framework_pairs(dictionary, real)
        if not dictionary.pairs:
            raise ValueError("framework filter removed every dictionary pair")
    x_src, x_tgt, kept = align.build_training_matrices(dictionary, source, target)
    logger.info("solving on %d dictionary pairs", len(kept))
    solve = align.procrustes if solver == "procrustes" else align.solve_linear
    alignment = solve(x_src, x_tgt)
    align.save_alignment(alignment, out_w)
    return alignment


def stage_refine(
    src_vec, tgt_vecs: list, iterations: int, metric: str, k: int,
    top_n: int | None, out_w, out_trace, render_figures: bool = True,
):
    source = embed_io.load_embeddings(src_vec)
    target = merge_sets(*[embed_io.load_embeddings(p) for p in tgt_vecs])
    alignment, trace = align.refine_unsupervised(
        source, target, iterations, metric=metric, k=k, top_n=top_n
    )
    align.save_alignment(alignment, out_w)
    with open(out_trace, "w", encoding="utf-8", newline="\n") as f:
        f.write("iteration\tdict_size\tmean_score\n")
        for i, (size, score) in enumerate(zip(trace.sizes, trace.mean_scores), start=1):
            f.write(f"{i}\t{size}\t{score:.6f}\n")
    if render_figures and trace.sizes:
        figures.save_trace_figure(
            trace.sizes, trace.mean_scores, str(out_trace) + ".png"
        )
    return alignment, trace


def stage_apply(w_path, e1_path, e2_path, es_path, out_vec):
    alignment = align.load_alignment(w_path)
    e1 = embed_io.load_embeddings(e1_path)
    e2 = embed_io.load_embeddings(e2_path)
    es = embed_io.load_embeddings(es_path) if es_path is not None else None
    merged = align.apply_alignment(alignment, e1, e2, es)
    embed_io.save_embeddings(merged, out_vec)
    return merged


def stage_eval_bli(
    dict_path, out_json,
    metric: str, k: int, policy: str, surface_filter: str, lowercase: bool,
    aligned_vec=None, report_path=None, src_vec=None, tgt_vec=None,
):
    """Evaluate either a merged aligned file (per-language views derived from
    the reallocation report) or two explicit embedding files."""
    if aligned_vec is not None:
        if report_path is None:
            raise ValueError("evaluating a merged file requires the reallocation report")
        emb = embed_io.load_embeddings(aligned_vec)
        real = realloc.read_realloc_report(report_path)
        src_view = emb.subset(real.language_tokens(1))
        tgt_view = emb.subset(real.language_tokens(2))
    elif src_vec is not None and tgt_vec is not None:
        src_view = embed_io.load_embeddings(src_vec)
        tgt_view = embed_io.load_embeddings(tgt_vec)
    else:
        raise ValueError("need either an aligned file plus report, or source and target files")
    test = load_dictionary(dict_path)
    report = retrieval.evaluate_bli(
        src_view, tgt_view, test, metric=metric, k=k,
        policy=policy, surface_filter=surface_filter, lowercase=lowercase,
    )
    with open(out_json, "w", encoding="utf-8", newline="\n") as f:
        f.write(report.to_json())
    logger.info("%s: %s", dict_path, report.summary())
    return report


def run_pipeline(cfg: PipelineConfig) -> dict:
    """Run every stage in order; artifacts land in cfg.out_dir. Returns the
    artifact paths plus any BLI reports."""
    cfg.validate()
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "counts1": out / "counts_l1.tsv",
        "counts2": out / "counts_l2.tsv",
        "joint_vocab": out / "joint_vocab.tsv",
        "corpus_joint": out / "corpus_joint.txt",
        "embeddings": out / "embeddings_joint.vec",
        "realloc_report": out / "realloc_report.tsv",
        "e1": out / "e1.vec",
        "e2": out / "e2.vec",
        "es": out / "es.vec",
        "w": out / "w.txt",
        "trace": out / "refine_trace.tsv",
        "aligned": out / "aligned.vec",
    }

    with _stage("count", [paths["counts1"], paths["counts2"]]):
        stage_count(cfg.corpus1, paths["counts1"], cfg.lowercase, cfg.min_count, "l1")
        stage_count(cfg.corpus2, paths["counts2"], cfg.lowercase, cfg.min_count, "l2")

    with _stage("joint-vocab", [paths["joint_vocab"]]):
        stage_joint_vocab(paths["counts1"], paths["counts2"], paths["joint_vocab"],
                          max_size=cfg.max_vocab)

    with _stage("concat", [paths["corpus_joint"]]):
        shuffle_seed = stage_seed(cfg.seed, "concat") if cfg.shuffle else None
        stage_concat(cfg.corpus1, cfg.corpus2, paths["corpus_joint"], shuffle_seed)

    with _stage("train", [paths["embeddings"]]):
        train_cfg = sgns.TrainConfig(
            dim=cfg.dim, window=cfg.window, negatives=cfg.negatives,
            epochs=cfg.epochs, learning_rate=cfg.learning_rate,
            subsample_t=cfg.subsample_t, min_count=cfg.min_count,
            seed=stage_seed(cfg.seed, "train"), mode=cfg.mode,
            lowercase=cfg.lowercase,
        )
        stage_train(paths["corpus_joint"], paths["joint_vocab"],
                    paths["embeddings"], train_cfg)

    split_source = paths["embeddings"]
    if cfg.normalize != "none":
        paths["embeddings_norm"] = out / "embeddings_norm.vec"
        with _stage("normalize", [paths["embeddings_norm"]]):
            stage_normalize(paths["embeddings"], paths["embeddings_norm"], cfg.normalize)
        split_source = paths["embeddings_norm"]

    with _stage("realloc", [paths["realloc_report"]]):
        stage_realloc(paths["counts1"], paths["counts2"], paths["joint_vocab"],
                      cfg.gamma, paths["realloc_report"])

    with _stage("split", [paths["e1"], paths["e2"], paths["es"]]):
        stage_split(split_source, paths["realloc_report"],
                    paths["e1"], paths["e2"], paths["es"])

    if cfg.align_mode == "supervised":
        with _stage("align", [paths["w"]]):
            stage_align_supervised(
                cfg.seed_dict, paths["e1"], [paths["e2"], paths["es"]],
                paths["realloc_report"], cfg.solver, paths["w"],
                lowercase=cfg.lowercase,
            )
    else:
        trace_outputs = [paths["w"], paths["trace"], Path(str(paths["trace"]) + ".png")]
        with _stage("refine", trace_outputs):
            stage_refine(
                paths["e1"], [paths["e2"], paths["es"]], cfg.refine_iterations,
                "csls", cfg.csls_k, cfg.induce_top_n,
                paths["w"], paths["trace"], render_figures=cfg.figures,
            )

    with _stage("apply", [paths["aligned"]]):
        stage_apply(paths["w"], paths["e1"], paths["e2"], paths["es"], paths["aligned"])

    reports = {}
    for dict_path in cfg.eval_dicts:
        stem = Path(dict_path).stem
        report_out = out / f"bli_{stem}.json"
        with _stage(f"eval-bli:{stem}", [report_out]):
            reports[stem] = stage_eval_bli(
                dict_path, report_out,
                cfg.eval_metric, cfg.csls_k, cfg.eval_policy, cfg.eval_filter,
                cfg.lowercase,
                aligned_vec=paths["aligned"], report_path=paths["realloc_report"],
            )
        paths[f"bli_{stem}"] = report_out

    return {"paths": {k: str(v) for k, v in paths.items()}, "reports": reports}
