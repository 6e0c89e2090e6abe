"""Alignment of dumped contextual features: subword-to-word pooling,
word-alignment parsing, per-layer map learning, and application.

Feature files are encoder-agnostic TSV dumps, one vector per line:
`sent_id<TAB>tok_idx<TAB>token<TAB>layer<TAB>v1 v2 ... vd`. Word alignments
use the standard `i-j` pair format, one line per parallel sentence, indices
0-based into the whitespace-tokenized sentence files.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .align import AlignmentMatrix, procrustes, solve_linear

logger = logging.getLogger("clwe.ctx")


@dataclass
class TokenFeatureRecord:
    sent_id: int
    tok_idx: int
    token: str
    layer: int
    vector: np.ndarray


@dataclass
class WordAlignmentSet:
    """Per parallel sentence: (source index, target index) link pairs."""

    links: list[list[tuple[int, int]]]
    dropped: int = 0


def read_feature_file(path) -> list[TokenFeatureRecord]:
    records = []
    dim = None
    seen: set[tuple[int, int, int]] = set()
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            fields = line.rstrip("\n").split("\t")
            if len(fields) != 5:
                raise ValueError(f"{path}: line {lineno}: expected 5 tab-separated fields")
            try:
                sent_id, tok_idx, layer = int(fields[0]), int(fields[1]), int(fields[3])
                vector = np.fromstring(fields[4], dtype=np.float64, sep=" ")
            except ValueError as exc:
                raise ValueError(f"{path}: line {lineno}: malformed record") from exc
            if vector.size == 0:
                raise ValueError(f"{path}: line {lineno}: empty feature vector")
            if dim is None:
                dim = vector.size
            elif vector.size != dim:
                raise ValueError(
                    f"{path}: line {lineno}: dimension {vector.size} != {dim}"
                )
            key = (sent_id, tok_idx, layer)
            if key in seen:
                raise ValueError(f"{path}: line {lineno}: duplicate record key {key}")
            seen.add(key)
            records.append(TokenFeatureRecord(sent_id, tok_idx, fields[2], layer, vector))
    return records


def write_feature_file(records, path, precision: int = 6) -> None:
    fmt = f"%.{precision}f"
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for rec in records:
            values = " ".join(fmt % v for v in rec.vector)
            f.write(f"{rec.sent_id}\t{rec.tok_idx}\t{rec.token}\t{rec.layer}\t{values}\n")


def pool_subwords(records: list[TokenFeatureRecord], strategy: str = "mean") -> np.ndarray:
    """Pool the subword vectors of one word (arithmetic mean)."""
    if strategy != "mean":
        raise ValueError(f"unknown pooling strategy {strategy!r}")
    if not records:
        raise ValueError("cannot pool an empty subword group")
    stacked = np.stack([r.vector for r in records])
    return stacked.mean(axis=0)


def pool_word_features(
    records: list[TokenFeatureRecord], marker: str = "##"
) -> list[TokenFeatureRecord]:
    """Collapse subword-level records into word-level ones: a token starting
    with `marker` continues the previous word; word vectors are the mean of
    their subword vectors and word indices restart at 0 per sentence."""
    by_sent_layer: dict[tuple[int, int], list[TokenFeatureRecord]] = defaultdict(list)
    for rec in records:
        by_sent_layer[(rec.sent_id, rec.layer)].append(rec)
    out = []
    for (sent_id, layer), group in sorted(by_sent_layer.items()):
        group.sort(key=lambda r: r.tok_idx)
        words: list[list[TokenFeatureRecord]] = []
        for rec in group:
            if rec.token.startswith(marker) and words:
                words[-1].append(rec)
            else:
                words.append([rec])
        for word_idx, subwords in enumerate(words):
            surface = subwords[0].token + "".join(
                r.token[len(marker):] for r in subwords[1:]
            )
            out.append(
                TokenFeatureRecord(
                    sent_id, word_idx, surface, layer, pool_subwords(subwords)
                )
            )
    return out


def parse_word_alignments(alignment_path, src_path, tgt_path) -> WordAlignmentSet:
    """Read `i-j` alignment links against the two sentence files; links with
    indices beyond the sentence length are dropped and counted."""
    with open(src_path, encoding="utf-8") as f:
        src_lens = [len(line.split()) for line in f]
    with open(tgt_path, encoding="utf-8") as f:
        tgt_lens = [len(line.split()) for line in f]
    with open(alignment_path, encoding="utf-8") as f:
        align_lines = f.read().splitlines()
    if not (len(align_lines) == len(src_lens) == len(tgt_lens)):
        raise ValueError(
            f"line counts differ: {len(align_lines)} alignments, "
            f"{len(src_lens)} source and {len(tgt_lens)} target sentences"
        )
    links = []
    dropped = 0
    for lineno, (line, n_src, n_tgt) in enumerate(
        zip(align_lines, src_lens, tgt_lens), start=1
    ):
        pairs = []
        for item in line.split():
            try:
                i_s, j_s = item.split("-")
                i, j = int(i_s), int(j_s)
            except ValueError as exc:
                raise ValueError(
                    f"{alignment_path}: line {lineno}: malformed link {item!r}"
                ) from exc
            if 0 <= i < n_src and 0 <= j < n_tgt:
                pairs.append((i, j))
            else:
                dropped += 1
        links.append(pairs)
    if dropped:
        logger.warning("dropped %d out-of-range alignment links", dropped)
    return WordAlignmentSet(links, dropped)


def extract_aligned_features(
    src_records: list[TokenFeatureRecord],
    tgt_records: list[TokenFeatureRecord],
    alignments: WordAlignmentSet,
    first_link_only: bool = False,
) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    """Per layer, stack the feature vectors of aligned word pairs into
    (K, d) source/target matrices. Every link is one training pair unless
    `first_link_only` keeps just the first link of each source word."""
    src_by_key = {(r.sent_id, r.tok_idx, r.layer): r.vector for r in src_records}
    tgt_by_key = {(r.sent_id, r.tok_idx, r.layer): r.vector for r in tgt_records}
    layers = sorted({r.layer for r in src_records} & {r.layer for r in tgt_records})
    pairs: dict[int, tuple[list, list]] = {layer: ([], []) for layer in layers}
    missing = 0
    for sent_id, sent_links in enumerate(alignments.links):
        used_sources = set()
        for i, j in sent_links:
            if first_link_only:
                if i in used_sources:
                    continue
                used_sources.add(i)
            for layer in layers:
                sv = src_by_key.get((sent_id, i, layer))
                tv = tgt_by_key.get((sent_id, j, layer))
                if sv is None or tv is None:
                    missing += 1
                    continue
                pairs[layer][0].append(sv)
                pairs[layer][1].append(tv)
    if missing:
        logger.warning("skipped %d links without features on both sides", missing)
    return {
        layer: (np.stack(s), np.stack(t))
        for layer, (s, t) in pairs.items()
        if s
    }


def learn_ctx_alignment(
    pairs_by_layer: dict[int, tuple[np.ndarray, np.ndarray]],
    pair_cap: int = 100_000,
    solver: str = "procrustes",
    seed: int = 0,
) -> dict[int, AlignmentMatrix]:
    """Solve one alignment matrix per layer from its aligned feature pairs,
    uniformly subsampling (seeded) down to `pair_cap` pairs first."""
    if solver not in ("procrustes", "linear"):
        raise ValueError(f"unknown solver {solver!r}")
    if not pairs_by_layer:
        raise ValueError("no layers with aligned pairs")
    out = {}
    for layer, (src, tgt) in sorted(pairs_by_layer.items()):
        if src.shape[0] == 0:
            raise ValueError(f"layer {layer} has no aligned pairs")
        n, d = src.shape
        if n > pair_cap:
            idx = np.random.RandomState(seed).permutation(n)[:pair_cap]
            idx.sort()
            src, tgt = src[idx], tgt[idx]
        elif n < d:
            logger.warning("layer %d: only %d pairs for dimension %d", layer, n, d)
        solve = procrustes if solver == "procrustes" else solve_linear
        out[layer] = solve(src.T, tgt.T)
    return out


def apply_ctx_alignment(
    matrices: dict[int, AlignmentMatrix], feature_path, out_path, precision: int = 6
) -> int:
    """Rewrite a feature file with each vector mapped by its layer's matrix;
    metadata is preserved. Returns the number of records written."""
    records = read_feature_file(feature_path)
    missing = sorted({r.layer for r in records} - set(matrices))
    if missing:
        raise ValueError(f"no alignment matrix for layer(s) {missing}")
    mapped = [
        TokenFeatureRecord(
            r.sent_id, r.tok_idx, r.token, r.layer, matrices[r.layer].W @ r.vector
        )
        for r in records
    ]
    write_feature_file(mapped, out_path, precision=precision)
    return len(mapped)


def sum_layers(
    records: list[TokenFeatureRecord], out_layer: int = -1
) -> list[TokenFeatureRecord]:
    """Element-wise sum of each token's vectors across layers, emitted under
    a single synthetic layer id. Every (sentence, token) key must carry the
    same set of layers."""
    grouped: dict[tuple[int, int], list[TokenFeatureRecord]] = defaultdict(list)
    for rec in records:
        grouped[(rec.sent_id, rec.tok_idx)].append(rec)
    layer_sets = {frozenset(r.layer for r in group) for group in grouped.values()}
    if len(layer_sets) > 1:
        raise ValueError("layer sets differ across (sentence, token) keys")
    out = []
    for (sent_id, tok_idx), group in sorted(grouped.items()):
        total = np.sum([r.vector for r in group], axis=0)
        out.append(TokenFeatureRecord(sent_id, tok_idx, group[0].token, out_layer, total))
    return out
