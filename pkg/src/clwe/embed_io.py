"""Embedding containers, text-format I/O, normalization, and 2-D PCA export.

All operations are pure functions over immutable inputs and safe to call
concurrently. Reductions (norms, means, SVD) use sequential per-row
accumulation via numpy, so results do not depend on thread count.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger("clwe.embed_io")


class FormatError(ValueError):
    """An on-disk file does not match its declared format."""


@dataclass
class Vocabulary:
    """Ordered list of unique tokens with a token -> row-index map."""

    tokens: list[str]
    index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.index = {tok: i for i, tok in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise ValueError("vocabulary contains duplicate tokens")

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token: str):
        return token in self.index


@dataclass
class EmbeddingSet:
    """A vocabulary plus an (n, d) matrix; row j is the vector of token j."""

    vocab: Vocabulary
    matrix: np.ndarray

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix)
        if self.matrix.ndim != 2:
            raise ValueError("embedding matrix must be 2-dimensional")
        if self.matrix.shape[0] != len(self.vocab):
            raise ValueError(
                f"matrix has {self.matrix.shape[0]} rows for "
                f"{len(self.vocab)} vocabulary tokens"
            )
        if self.matrix.size and not np.all(np.isfinite(self.matrix)):
            raise ValueError("embedding matrix contains non-finite values")

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __len__(self):
        return len(self.vocab)

    def row(self, token: str) -> np.ndarray:
        return self.matrix[self.vocab.index[token]]

    def subset(self, tokens: list[str]) -> "EmbeddingSet":
        """Rows for `tokens`, in the given order. Tokens must all be present."""
        idx = [self.vocab.index[t] for t in tokens]
        return EmbeddingSet(Vocabulary(list(tokens)), self.matrix[idx].copy())


def load_embeddings(path, max_vocab: int | None = None) -> EmbeddingSet:
    """Read a text-format embedding file (header "<count> <dim>", one
    "<token> <floats>" line per word).

    At most `max_vocab` rows are kept, in file order. Duplicate tokens keep
    the first occurrence; later ones are skipped and counted in a warning.
    """
    tokens: list[str] = []
    seen: set[str] = set()
    rows: list[np.ndarray] = []
    duplicates = 0
    with open(path, "rb") as f:
        header = f.readline()
        try:
            text = header.decode("utf-8")
            count_s, dim_s = text.split()
            declared_count, dim = int(count_s), int(dim_s)
        except (UnicodeDecodeError, ValueError) as exc:
            raise FormatError(f"{path}: line 1: malformed header {header!r}") from exc
        if dim < 1 or declared_count < 0:
            raise FormatError(f"{path}: line 1: invalid header values {text.strip()!r}")
        for lineno, raw in enumerate(f, start=2):
            if not raw.strip():
                continue
            if max_vocab is not None and len(tokens) >= max_vocab:
                break
            try:
                line = raw.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise FormatError(f"{path}: line {lineno}: not valid UTF-8") from exc
            parts = line.rstrip("\n").split(" ")
            # fastText-style files end rows with a trailing space
            if parts and parts[-1] == "":
                parts.pop()
            token, values = parts[0], parts[1:]
            if len(values) != dim:
                raise FormatError(
                    f"{path}: line {lineno}: expected {dim} values, got {len(values)}"
                )
            if token in seen:
                duplicates += 1
                continue
            try:
                vec = np.array(values, dtype=np.float64)
            except ValueError as exc:
                raise FormatError(f"{path}: line {lineno}: non-numeric value") from exc
            seen.add(token)
            tokens.append(token)
            rows.append(vec)
    if duplicates:
        logger.warning("%s: skipped %d duplicate tokens", path, duplicates)
    if max_vocab is None and len(tokens) + duplicates != declared_count:
        logger.warning(
            "%s: header declares %d rows, found %d", path, declared_count, len(tokens) + duplicates
        )
    matrix = np.vstack(rows) if rows else np.zeros((0, dim))
    return EmbeddingSet(Vocabulary(tokens), matrix)


def save_embeddings(emb: EmbeddingSet, path, precision: int = 4) -> None:
    """Write the text format read by `load_embeddings`, floats fixed to
    `precision` decimals."""
    fmt = f"%.{precision}f"
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"{len(emb)} {emb.dim}\n")
        for token, row in zip(emb.vocab.tokens, emb.matrix):
            if any(ch.isspace() for ch in token):
                raise ValueError(f"token {token!r} contains whitespace, cannot serialize")
            f.write(token + " " + " ".join(fmt % v for v in row) + "\n")


def normalize(emb: EmbeddingSet, mode: str = "unit") -> EmbeddingSet:
    """Return a normalized copy: `unit` scales rows to L2 norm 1,
    `center_unit` subtracts the column mean first, `none` is the identity."""
    if mode == "none":
        return EmbeddingSet(emb.vocab, emb.matrix.copy())
    if mode not in ("unit", "center_unit"):
        raise ValueError(f"unknown normalization mode {mode!r}")
    matrix = emb.matrix.astype(np.float64, copy=True)
    if mode == "center_unit":
        matrix -= matrix.mean(axis=0)
    norms = np.linalg.norm(matrix, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ValueError(
            f"cannot unit-normalize zero vector for token {emb.vocab.tokens[zero[0]]!r}"
        )
    return EmbeddingSet(emb.vocab, matrix / norms[:, None])


def pca_project(
    sets: list[tuple[EmbeddingSet, str]], dims: int = 2
) -> list[tuple[str, str, tuple[float, ...]]]:
    """Project one or more labeled embedding sets onto their joint top
    principal directions.

    All rows are stacked and mean-centered jointly; components come from the
    SVD of the centered matrix, ordered by decreasing variance, each with its
    largest-magnitude loading made positive so output is deterministic.
    Returns (token, label, coordinates) rows in input order.
    """
    if not sets:
        raise ValueError("no embedding sets given")
    d = sets[0][0].dim
    if any(e.dim != d for e, _ in sets):
        raise ValueError("embedding sets have differing dimensions")
    if dims > d:
        raise ValueError(f"cannot extract {dims} components from dimension {d}")
    stacked = np.vstack([e.matrix for e, _ in sets]).astype(np.float64)
    if stacked.shape[0] < dims:
        raise ValueError("need at least as many rows as output dimensions")
    centered = stacked - stacked.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    components = vt[:dims]
    for i in range(dims):
        peak = np.argmax(np.abs(components[i]))
        if components[i, peak] < 0:
            components[i] = -components[i]
    coords = centered @ components.T
    out = []
    pos = 0
    for emb, label in sets:
        for token in emb.vocab.tokens:
            out.append((token, label, tuple(coords[pos])))
            pos += 1
    return out


def write_pca_tsv(rows, path) -> None:
    """Emit PCA rows as TSV with header token/label/x/y (2-D only)."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("token\tlabel\tx\ty\n")
        for token, label, coords in rows:
            if len(coords) != 2:
                raise ValueError("TSV export expects 2-D projections")
            f.write(f"{token}\t{label}\t{coords[0]:.6f}\t{coords[1]:.6f}\n")
