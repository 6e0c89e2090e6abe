"""Linear and orthogonal alignment solvers, dictionary-based training-matrix
assembly, CSLS dictionary induction, and the unsupervised self-learning
refinement loop.

The orthogonal solver is the Procrustes closed form: with training matrices
X_src, X_tgt of shape (d, K), the rotation minimizing ||W X_src - X_tgt||_F
over orthogonal W is W = U V^T where U S V^T is the SVD of X_tgt X_src^T.
The unconstrained solver minimizes the same objective over all of R^{dxd}
via least squares (Moore-Penrose pseudo-inverse when rank-deficient).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .corpus import L1, L2, SHARED
from .dictionaries import SeedDictionary
from .embed_io import EmbeddingSet, Vocabulary
from .realloc import ReallocatedVocabulary
from .retrieval import csls, cosine_knn

logger = logging.getLogger("clwe.align")

ORTHOGONALITY_TOL = 1e-6


@dataclass
class AlignmentMatrix:
    """A d x d map applied to source-space vectors, optionally orthogonal.

    `degenerate` marks a Procrustes solve whose SVD had repeated or vanishing
    singular values, where the optimum is not unique.
    """

    W: np.ndarray
    orthogonal: bool
    degenerate: bool = False

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=np.float64)
        if self.W.ndim != 2 or self.W.shape[0] != self.W.shape[1]:
            raise ValueError("alignment matrix must be square")
        if self.orthogonal:
            err = orthogonality_error(self.W)
            if err > ORTHOGONALITY_TOL:
                raise ValueError(f"matrix is not orthogonal (max |W^T W - I| = {err:.2e})")

    @property
    def dim(self) -> int:
        return self.W.shape[0]


def orthogonality_error(W: np.ndarray) -> float:
    d = W.shape[0]
    return float(np.max(np.abs(W.T @ W - np.eye(d))))


def build_training_matrices(
    dictionary: SeedDictionary, src: EmbeddingSet, tgt: EmbeddingSet
) -> tuple[np.ndarray, np.ndarray, list[tuple[str, str]]]:
    """Column-align the embeddings of every dictionary pair present in both
    vocabularies; OOV pairs are dropped and reported."""
    if src.dim != tgt.dim:
        raise ValueError("source and target dimensions differ")
    kept = [
        (s, t) for s, t in dictionary.pairs if s in src.vocab and t in tgt.vocab
    ]
    dropped = len(dictionary.pairs) - len(kept)
    if dropped:
        logger.warning("dropped %d dictionary pairs with OOV words", dropped)
    if not kept:
        raise ValueError("no dictionary pair is covered by both vocabularies")
    x_src = np.stack([src.row(s) for s, _ in kept], axis=1).astype(np.float64)
    x_tgt = np.stack([tgt.row(t) for _, t in kept], axis=1).astype(np.float64)
    return x_src, x_tgt, kept


def solve_linear(x_src: np.ndarray, x_tgt: np.ndarray) -> AlignmentMatrix:
    """Least-squares minimizer of ||W X_src - X_tgt||_F, unconstrained."""
    if x_src.shape != x_tgt.shape:
        raise ValueError("training matrices must have equal shapes")
    solution, *_ = np.linalg.lstsq(x_src.T, x_tgt.T, rcond=None)
    return AlignmentMatrix(solution.T, orthogonal=False)


def procrustes(x_src: np.ndarray, x_tgt: np.ndarray) -> AlignmentMatrix:
    """Orthogonal minimizer of ||W X_src - X_tgt||_F (closed form via SVD)."""
    if x_src.shape != x_tgt.shape:
        raise ValueError("training matrices must have equal shapes")
    if not (np.all(np.isfinite(x_src)) and np.all(np.isfinite(x_tgt))):
        raise ValueError("training matrices contain non-finite values")
    product = x_tgt @ x_src.T
    u, s, vt = np.linalg.svd(product)
    scale = max(1.0, float(s[0])) if s.size else 1.0
    degenerate = bool(s.size and s[-1] <= 1e-12 * scale)
    if s.size > 1 and np.min(np.diff(s[::-1])) <= 1e-9 * scale:
        degenerate = True
    if degenerate:
        logger.warning("SVD spectrum is degenerate; the orthogonal optimum is not unique")
    return AlignmentMatrix(u @ vt, orthogonal=True, degenerate=degenerate)


def apply_alignment(
    alignment: AlignmentMatrix,
    mapped: EmbeddingSet,
    fixed: EmbeddingSet,
    shared: EmbeddingSet | None = None,
) -> EmbeddingSet:
    """Merge the three vocabularies into one space: `mapped` rows are
    multiplied by W, `fixed` and `shared` rows pass through untouched."""
    parts = [mapped, fixed] + ([shared] if shared is not None else [])
    if any(p.dim != alignment.dim for p in parts):
        raise ValueError("embedding dimension does not match the alignment matrix")
    tokens: list[str] = []
    seen: set[str] = set()
    for part in parts:
        for token in part.vocab.tokens:
            if token in seen:
                raise ValueError(f"token {token!r} appears in more than one input set")
            seen.add(token)
            tokens.append(token)
    blocks = [mapped.matrix @ alignment.W.T, fixed.matrix]
    if shared is not None:
        blocks.append(shared.matrix)
    return EmbeddingSet(Vocabulary(tokens), np.vstack(blocks))


def filter_framework_pairs(
    dictionary: SeedDictionary, realloc: ReallocatedVocabulary
) -> SeedDictionary:
    """Keep only pairs that constrain the map: source exclusive to language 1,
    target on the side being mapped onto (language 2 or shared). Shared
    sources are fixed points and would add self-supervision noise."""
    keep = []
    for s, t in dictionary.pairs:
        if realloc.membership.get(s) == L1 and realloc.membership.get(t) in (L2, SHARED):
            keep.append((s, t))
    dropped = len(dictionary.pairs) - len(keep)
    if dropped:
        logger.info("framework filter dropped %d pairs", dropped)
    return SeedDictionary(keep)


def _induce_scored(
    src: EmbeddingSet,
    tgt: EmbeddingSet,
    metric: str,
    k: int,
    mutual: bool,
    top_n: int | None,
) -> list[tuple[str, str, float]]:
    if metric == "csls":
        forward = csls(src, tgt, k=k, k_out=1)
        backward = csls(tgt, src, k=k, k_out=1) if mutual else None
    elif metric == "cosine":
        forward = cosine_knn(src, tgt, k_out=1)
        backward = cosine_knn(tgt, src, k_out=1) if mutual else None
    else:
        raise ValueError(f"unknown induction metric {metric!r}")
    best_src = None
    if backward is not None:
        best_src = {t: ranked[0][0] for t, ranked in zip(tgt.vocab.tokens, backward.neighbors)}
    scored = []
    for s, ranked in zip(src.vocab.tokens, forward.neighbors):
        t, score = ranked[0]
        if best_src is not None and best_src[t] != s:
            continue
        scored.append((s, t, score))
    scored.sort(key=lambda item: -item[2])
    if top_n is not None:
        scored = scored[:top_n]
    return scored


def induce_dictionary(
    src: EmbeddingSet,
    tgt: EmbeddingSet,
    metric: str = "csls",
    k: int = 10,
    mutual: bool = True,
    top_n: int | None = None,
) -> SeedDictionary:
    """Pair every source token with its best-scoring target; with `mutual`,
    keep only pairs that are each other's best match. Pairs are ordered by
    score descending and truncated to `top_n`."""
    scored = _induce_scored(src, tgt, metric, k, mutual, top_n)
    return SeedDictionary([(s, t) for s, t, _ in scored])


@dataclass
class RefinementTrace:
    """Per-iteration dictionary sizes and mean induced-pair scores."""

    sizes: list[int] = field(default_factory=list)
    mean_scores: list[float] = field(default_factory=list)
    stopped_early: bool = False


def refine_unsupervised(
    src: EmbeddingSet,
    tgt: EmbeddingSet,
    iterations: int,
    metric: str = "csls",
    k: int = 10,
    mutual: bool = True,
    top_n: int | None = None,
) -> tuple[AlignmentMatrix, RefinementTrace]:
    """Self-learning refinement: alternately induce a dictionary in the
    currently mapped space and re-solve Procrustes against the original
    source vectors (W is replaced each round, never composed with drifted
    intermediates). Stops early with `stopped_early` set if induction comes
    up empty, returning the best map seen so far."""
    if iterations < 1:
        raise ValueError("need at least one refinement iteration")
    trace = RefinementTrace()
    current = AlignmentMatrix(np.eye(src.dim), orthogonal=True)
    best = current
    best_score = -np.inf
    for iteration in range(1, iterations + 1):
        mapped = EmbeddingSet(src.vocab, src.matrix @ current.W.T)
        scored = _induce_scored(mapped, tgt, metric, k, mutual, top_n)
        if not scored:
            logger.warning("iteration %d induced an empty dictionary; stopping", iteration)
            trace.stopped_early = True
            return best, trace
        mean_score = float(np.mean([score for _, _, score in scored]))
        trace.sizes.append(len(scored))
        trace.mean_scores.append(mean_score)
        logger.info(
            "iteration %d: %d induced pairs, mean score %.4f",
            iteration, len(scored), mean_score,
        )
        if len(scored) < src.dim:
            logger.warning(
                "only %d induced pairs for dimension %d; the solved map is "
                "underconstrained (is the initial space coupled enough?)",
                len(scored), src.dim,
            )
        dictionary = SeedDictionary([(s, t) for s, t, _ in scored])
        x_src, x_tgt, _ = build_training_matrices(dictionary, src, tgt)
        current = procrustes(x_src, x_tgt)
        if mean_score > best_score:
            best_score, best = mean_score, current
    return current, trace


def save_alignment(alignment: AlignmentMatrix, path) -> None:
    """Text serialization: a dimension header line, then d rows of d floats."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"{alignment.dim}\n")
        for row in alignment.W:
            f.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def load_alignment(path) -> AlignmentMatrix:
    with open(path, encoding="utf-8") as f:
        try:
            d = int(f.readline())
        except ValueError as exc:
            raise ValueError(f"{path}: malformed dimension header") from exc
        rows = []
        for lineno, line in enumerate(f, start=2):
            if not line.strip():
                continue
            values = line.split()
            if len(values) != d:
                raise ValueError(f"{path}: line {lineno}: expected {d} values")
            rows.append([float(v) for v in values])
    if len(rows) != d:
        raise ValueError(f"{path}: expected {d} rows, found {len(rows)}")
    W = np.array(rows)
    return AlignmentMatrix(W, orthogonal=orthogonality_error(W) <= ORTHOGONALITY_TOL)
