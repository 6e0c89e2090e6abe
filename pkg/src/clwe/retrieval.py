"""Exact cosine and CSLS retrieval kernels and the bilingual lexicon
induction (BLI) evaluation harness.

CSLS discounts hub targets: CSLS(x, y) = 2 cos(x, y) - rT(x) - rS(y), where
rT(x) is the mean cosine of query x to its k nearest targets and rS(y) the
mean cosine of target y to its k nearest queries. Both kernels are blocked
exact matrix products (no approximate neighbor search): every score against
every candidate is computed and the top-k is exact, with ties broken toward
the lower target index (the more frequent token in frequency-ranked sets).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .dictionaries import SeedDictionary
from .embed_io import EmbeddingSet

logger = logging.getLogger("clwe.retrieval")

# cap on the float64 score buffer of one query block, in elements
_BLOCK_BUDGET = 1 << 24


@dataclass
class RetrievalResult:
    """Per query: a ranked (target token, score) list, scores non-increasing."""

    query_tokens: list[str]
    neighbors: list[list[tuple[str, float]]]

    def top1(self) -> list[str]:
        return [ranked[0][0] for ranked in self.neighbors]


def _unit_rows(emb: EmbeddingSet) -> np.ndarray:
    matrix = emb.matrix.astype(np.float64, copy=False)
    norms = np.linalg.norm(matrix, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ValueError(
            f"zero-norm embedding for token {emb.vocab.tokens[zero[0]]!r}"
        )
    return matrix / norms[:, None]


def _block_rows(n_cols: int) -> int:
    return max(1, _BLOCK_BUDGET // max(1, n_cols))


def _top_indices(row: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k largest entries, exact, ties toward lower index."""
    n = row.shape[0]
    k = min(k, n)
    if k == n or n <= 2048:
        order = np.argsort(-row, kind="stable")
        return order[:k]
    kth = np.partition(row, n - k)[n - k]
    candidates = np.flatnonzero(row >= kth)
    order = np.argsort(-row[candidates], kind="stable")
    return candidates[order][:k]


def _mean_topk(queries_unit: np.ndarray, targets_unit: np.ndarray, k: int) -> np.ndarray:
    """Per query row: mean cosine to its k nearest target rows."""
    n_q, n_t = queries_unit.shape[0], targets_unit.shape[0]
    out = np.empty(n_q)
    block = _block_rows(n_t)
    for start in range(0, n_q, block):
        stop = min(start + block, n_q)
        scores = queries_unit[start:stop] @ targets_unit.T
        if k >= n_t:
            out[start:stop] = scores.mean(axis=1)
        else:
            part = -np.partition(-scores, k - 1, axis=1)[:, :k]
            out[start:stop] = part.mean(axis=1)
    return out


def _rank_block(
    scores: np.ndarray,
    query_tokens: list[str],
    target_tokens: list[str],
    k_out: int,
    neighbors: list[list[tuple[str, float]]],
) -> None:
    for row in scores:
        top = _top_indices(row, k_out)
        neighbors.append([(target_tokens[j], float(row[j])) for j in top])


def cosine_knn(queries: EmbeddingSet, targets: EmbeddingSet, k_out: int) -> RetrievalResult:
    """Exact top-`k_out` targets per query by cosine similarity."""
    if queries.dim != targets.dim:
        raise ValueError("query and target dimensions differ")
    if k_out < 1:
        raise ValueError("k_out must be positive")
    q_unit = _unit_rows(queries)
    t_unit = _unit_rows(targets)
    neighbors: list[list[tuple[str, float]]] = []
    block = _block_rows(len(targets))
    for start in range(0, len(queries), block):
        scores = q_unit[start : start + block] @ t_unit.T
        _rank_block(scores, queries.vocab.tokens, targets.vocab.tokens, k_out, neighbors)
    return RetrievalResult(list(queries.vocab.tokens), neighbors)


def csls(
    queries: EmbeddingSet, targets: EmbeddingSet, k: int = 10, k_out: int = 1
) -> RetrievalResult:
    """Exact top-`k_out` targets per query by CSLS with neighborhood size `k`."""
    if queries.dim != targets.dim:
        raise ValueError("query and target dimensions differ")
    if k < 1 or k_out < 1:
        raise ValueError("k and k_out must be positive")
    if k > len(targets) or k > len(queries):
        raise ValueError(
            f"neighborhood k={k} exceeds available rows "
            f"({len(queries)} queries, {len(targets)} targets)"
        )
    q_unit = _unit_rows(queries)
    t_unit = _unit_rows(targets)
    r_t = _mean_topk(q_unit, t_unit, k)
    r_s = _mean_topk(t_unit, q_unit, k)
    neighbors: list[list[tuple[str, float]]] = []
    block = _block_rows(len(targets))
    for start in range(0, len(queries), block):
        stop = min(start + block, len(queries))
        scores = 2.0 * (q_unit[start:stop] @ t_unit.T) - r_t[start:stop, None] - r_s[None, :]
        _rank_block(scores, queries.vocab.tokens, targets.vocab.tokens, k_out, neighbors)
    return RetrievalResult(list(queries.vocab.tokens), neighbors)


def retrieve(
    queries: EmbeddingSet,
    targets: EmbeddingSet,
    metric: str = "csls",
    k: int = 10,
    k_out: int = 1,
) -> RetrievalResult:
    if metric == "csls":
        return csls(queries, targets, k=k, k_out=k_out)
    if metric == "cosine":
        return cosine_knn(queries, targets, k_out=k_out)
    raise ValueError(f"unknown retrieval metric {metric!r}")


@dataclass
class BLIReport:
    """Precision@1 accounting for a translation test set.

    Every test source is scored exactly once. Category counts partition
    `total`: sources retrieved normally, sources missing from the source
    vocabulary (scored as predicting their own surface form), and sources
    whose gold translations are all missing from the target vocabulary
    (scored incorrect). Under the `drop` policy the latter two are excluded
    from the denominator instead and recorded in `excluded`.
    """

    total: int
    correct: int
    evaluated: int
    source_oov_self: int
    target_oov_incorrect: int
    excluded: int
    pairs_read: int
    policy: str
    surface_filter: str
    metric: str
    k: int
    p_at_1: float = field(init=False)

    def __post_init__(self):
        if self.evaluated + self.source_oov_self + self.target_oov_incorrect != self.total:
            raise ValueError("category counts do not sum to total")
        self.p_at_1 = self.correct / self.total if self.total else 0.0

    def summary(self) -> str:
        return f"P@1 {self.p_at_1:.4f} ({self.correct}/{self.total})"

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2, sort_keys=True) + "\n"


def evaluate_bli(
    src: EmbeddingSet,
    tgt: EmbeddingSet,
    test: SeedDictionary,
    metric: str = "csls",
    k: int = 10,
    policy: str = "paper",
    surface_filter: str = "none",
    lowercase: bool = True,
) -> BLIReport:
    """Score P@1 of translating test sources into the target set.

    Gold targets are grouped per source; a prediction is correct if it
    equals any of them. `policy` controls out-of-vocabulary handling:
    `paper` keeps every source in the denominator (an OOV source predicts
    its own surface form, a source whose gold targets are all OOV counts
    incorrect), `drop` excludes OOV-affected sources from the denominator.
    `surface_filter="same_surface"` removes pairs whose source and target
    strings are equal before evaluation.
    """
    if policy not in ("paper", "drop"):
        raise ValueError(f"unknown OOV policy {policy!r}")
    if surface_filter not in ("none", "same_surface"):
        raise ValueError(f"unknown surface filter {surface_filter!r}")
    if not test.pairs:
        raise ValueError("test dictionary is empty")
    pairs = [(s.lower(), t.lower()) for s, t in test.pairs] if lowercase else list(test.pairs)
    if surface_filter == "same_surface":
        pairs = [(s, t) for s, t in pairs if s != t]
    pairs_read = len(pairs)
    if not pairs:
        raise ValueError("no test pairs left after filtering")

    gold: dict[str, list[str]] = {}
    for s, t in pairs:
        gold.setdefault(s, [])
        if t not in gold[s]:
            gold[s].append(t)

    retrievable: list[str] = []
    source_oov: list[str] = []
    target_oov: list[str] = []
    for s in gold:
        if s not in src.vocab:
            source_oov.append(s)
        elif not any(t in tgt.vocab for t in gold[s]):
            target_oov.append(s)
        else:
            retrievable.append(s)

    correct = 0
    if retrievable:
        queries = src.subset(retrievable)
        k_eff = min(k, len(queries), len(tgt))
        if k_eff < k:
            logger.warning("reducing CSLS neighborhood from %d to %d", k, k_eff)
        predictions = retrieve(queries, tgt, metric=metric, k=k_eff, k_out=1).top1()
        for s, pred in zip(retrievable, predictions):
            if pred in gold[s]:
                correct += 1

    if policy == "paper":
        # an OOV source predicts its own surface form
        correct += sum(1 for s in source_oov if s in gold[s])
        total = len(retrievable) + len(source_oov) + len(target_oov)
        return BLIReport(
            total=total,
            correct=correct,
            evaluated=len(retrievable),
            source_oov_self=len(source_oov),
            target_oov_incorrect=len(target_oov),
            excluded=0,
            pairs_read=pairs_read,
            policy=policy,
            surface_filter=surface_filter,
            metric=metric,
            k=k,
        )
    return BLIReport(
        total=len(retrievable),
        correct=correct,
        evaluated=len(retrievable),
        source_oov_self=0,
        target_oov_incorrect=0,
        excluded=len(source_oov) + len(target_oov),
        pairs_read=pairs_read,
        policy=policy,
        surface_filter=surface_filter,
        metric=metric,
        k=k,
    )
