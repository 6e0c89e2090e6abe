"""Vocabulary reallocation: move skewed-frequency shared tokens back to a
language-exclusive vocabulary so alignment can later correct them.

For a shared token w the decisive quantity is the total-normalized count
ratio r = (T2/T1) * (C1(w)/C2(w)). Tokens with r inside
[(1-gamma)/gamma, gamma/(1-gamma)] (inclusive) stay shared; larger r means
the token is relatively more frequent in language 1 and it moves there,
smaller r moves it to language 2. Language-exclusive tokens pass through
unchanged, so the partition always covers exactly the input vocabulary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .corpus import L1, L2, SHARED, CorpusStats, JointVocabulary
from .embed_io import EmbeddingSet


@dataclass
class ReallocatedVocabulary:
    """Post-reallocation partition over the same token set, plus the ratio
    each token was judged by."""

    tokens: list[str]
    membership: dict[str, str]
    ratios: dict[str, float]
    gamma: float

    def __len__(self):
        return len(self.tokens)

    def tokens_with(self, *labels: str) -> list[str]:
        want = set(labels)
        return [t for t in self.tokens if self.membership[t] in want]

    def language_tokens(self, side: int) -> list[str]:
        return self.tokens_with(L1 if side == 1 else L2, SHARED)


def count_ratio(token: str, stats1: CorpusStats, stats2: CorpusStats) -> float:
    """Total-normalized count ratio; +inf when the token is absent from
    language 2, 0 when absent from language 1."""
    c1, c2 = stats1.count(token), stats2.count(token)
    if c1 == 0 and c2 == 0:
        raise ValueError(f"token {token!r} appears in neither corpus")
    if c2 == 0:
        return math.inf
    if c1 == 0:
        return 0.0
    return (stats2.total / stats1.total) * (c1 / c2)


def reallocate(
    joint: JointVocabulary, stats1: CorpusStats, stats2: CorpusStats, gamma: float
) -> ReallocatedVocabulary:
    """Re-examine every shared token with the ratio rule above. gamma must
    lie strictly inside (0.5, 1); the bounds degenerate otherwise."""
    if not 0.5 < gamma < 1.0:
        raise ValueError(f"gamma must be in (0.5, 1), got {gamma}")
    lo = (1.0 - gamma) / gamma
    hi = gamma / (1.0 - gamma)
    membership = {}
    ratios = {}
    for token in joint.tokens:
        old = joint.membership[token]
        r = count_ratio(token, stats1, stats2)
        ratios[token] = r
        if old != SHARED:
            membership[token] = old
        elif r > hi:
            membership[token] = L1
        elif r < lo:
            membership[token] = L2
        else:
            membership[token] = SHARED
    return ReallocatedVocabulary(list(joint.tokens), membership, ratios, gamma)


def split_embeddings(
    emb: EmbeddingSet, realloc: ReallocatedVocabulary
) -> tuple[EmbeddingSet, EmbeddingSet, EmbeddingSet]:
    """Partition rows by reallocated membership (language 1, language 2,
    shared). Vectors are copied bit-identically; only labels move."""
    missing = [t for t in realloc.tokens if t not in emb.vocab]
    if missing:
        raise ValueError(f"token {missing[0]!r} not present in the embedding set")
    return (
        emb.subset(realloc.tokens_with(L1)),
        emb.subset(realloc.tokens_with(L2)),
        emb.subset(realloc.tokens_with(SHARED)),
    )


def write_realloc_report(
    realloc: ReallocatedVocabulary, joint: JointVocabulary, path
) -> None:
    """TSV report: token, membership before, membership after, ratio."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("token\told_membership\tnew_membership\tr\n")
        for token in realloc.tokens:
            r = realloc.ratios[token]
            f.write(
                f"{token}\t{joint.membership[token]}\t{realloc.membership[token]}\t{r:.6g}\n"
            )


def read_realloc_report(path, gamma: float = math.nan) -> ReallocatedVocabulary:
    tokens, membership, ratios = [], {}, {}
    with open(path, encoding="utf-8") as f:
        header = f.readline()
        if not header.startswith("token\t"):
            raise ValueError(f"{path}: missing report header")
        for lineno, line in enumerate(f, start=2):
            if not line.strip():
                continue
            try:
                token, _, new, r = line.rstrip("\n").split("\t")
            except ValueError as exc:
                raise ValueError(f"{path}: line {lineno}: expected 4 columns") from exc
            tokens.append(token)
            membership[token] = new
            ratios[token] = float(r)
    return ReallocatedVocabulary(tokens, membership, ratios, gamma)
