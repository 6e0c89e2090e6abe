"""Corpus ingestion, per-language token statistics, joint vocabulary
construction, and the dictionary-replacement pseudo-bilingual baseline."""

from __future__ import annotations

import logging
import random
from collections import Counter
from dataclasses import dataclass, field

from .dictionaries import SeedDictionary

logger = logging.getLogger("clwe.corpus")

L1 = "l1"
L2 = "l2"
SHARED = "shared"


@dataclass
class CorpusStats:
    """Token occurrence counts for one language's corpus."""

    counts: dict[str, int]
    language: str
    total: int = field(init=False)

    def __post_init__(self):
        if any(c < 1 for c in self.counts.values()):
            raise ValueError("zero or negative counts are not representable")
        self.total = sum(self.counts.values())

    def count(self, token: str) -> int:
        return self.counts.get(token, 0)


@dataclass
class JointVocabulary:
    """Union of two languages' vocabularies, each token labeled `l1`, `l2`,
    or `shared` (present in both corpora).

    Tokens are ordered by combined count descending, ties lexicographic, so
    row order downstream is deterministic and frequency-ranked.
    """

    tokens: list[str]
    membership: dict[str, str]
    stats1: CorpusStats
    stats2: CorpusStats

    def __post_init__(self):
        if set(self.tokens) != set(self.membership):
            raise ValueError("token list and membership map disagree")

    def __len__(self):
        return len(self.tokens)

    def tokens_with(self, *labels: str) -> list[str]:
        want = set(labels)
        return [t for t in self.tokens if self.membership[t] in want]

    def language_tokens(self, side: int) -> list[str]:
        """Tokens visible to language 1 or 2: its exclusive set plus shared."""
        return self.tokens_with(L1 if side == 1 else L2, SHARED)

    def class_sizes(self) -> dict[str, int]:
        sizes = Counter(self.membership.values())
        return {L1: sizes[L1], L2: sizes[L2], SHARED: sizes[SHARED]}


def count_tokens(
    path, lowercase: bool = False, min_count: int = 0, language: str | None = None
) -> CorpusStats:
    """Count whitespace-separated tokens in a one-sentence-per-line UTF-8
    corpus, keeping tokens that occur at least `min_count` times."""
    counts: Counter[str] = Counter()
    with open(path, "rb") as f:
        for lineno, raw in enumerate(f, start=1):
            try:
                line = raw.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise ValueError(f"{path}: line {lineno}: not valid UTF-8") from exc
            if lowercase:
                line = line.lower()
            counts.update(line.split())
    if min_count > 1:
        counts = Counter({t: c for t, c in counts.items() if c >= min_count})
    label = language if language is not None else str(path)
    return CorpusStats(dict(counts), label)


def write_counts(stats: CorpusStats, path) -> None:
    items = sorted(stats.counts.items(), key=lambda kv: (-kv[1], kv[0]))
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for token, count in items:
            f.write(f"{token}\t{count}\n")


def read_counts(path, language: str | None = None) -> CorpusStats:
    counts = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                token, count_s = line.rstrip("\n").split("\t")
                counts[token] = int(count_s)
            except ValueError as exc:
                raise ValueError(f"{path}: line {lineno}: expected 'token<TAB>count'") from exc
    label = language if language is not None else str(path)
    return CorpusStats(counts, label)


def build_joint_vocab(
    stats1: CorpusStats, stats2: CorpusStats, max_size: int | None = None
) -> JointVocabulary:
    """Union the two vocabularies; tokens present in both are `shared`.

    With `max_size`, the tokens with the largest combined count survive,
    ties broken lexicographically.
    """
    if not stats1.counts or not stats2.counts:
        raise ValueError("both corpora must contribute at least one token")
    combined = Counter(stats1.counts)
    combined.update(stats2.counts)
    ranked = sorted(combined, key=lambda t: (-combined[t], t))
    if max_size is not None:
        ranked = ranked[:max_size]
    membership = {}
    for token in ranked:
        in1 = token in stats1.counts
        in2 = token in stats2.counts
        membership[token] = SHARED if (in1 and in2) else (L1 if in1 else L2)
    return JointVocabulary(ranked, membership, stats1, stats2)


def write_joint_vocab(vocab: JointVocabulary, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for token in vocab.tokens:
            f.write(f"{token}\t{vocab.membership[token]}\n")


def read_joint_vocab(path, stats1: CorpusStats, stats2: CorpusStats) -> JointVocabulary:
    tokens, membership = [], {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                token, label = line.rstrip("\n").split("\t")
            except ValueError as exc:
                raise ValueError(f"{path}: line {lineno}: expected 'token<TAB>class'") from exc
            if label not in (L1, L2, SHARED):
                raise ValueError(f"{path}: line {lineno}: unknown class {label!r}")
            tokens.append(token)
            membership[token] = label
    return JointVocabulary(tokens, membership, stats1, stats2)


def concat_corpora(path1, path2, out, shuffle_seed: int | None = None) -> None:
    """Write every line of both corpora exactly once; with a seed, lines are
    permuted by a seeded shuffle, otherwise corpus 1 precedes corpus 2."""
    lines: list[bytes] = []
    for path in (path1, path2):
        with open(path, "rb") as f:
            data = f.read()
        chunk = data.split(b"\n")
        if chunk and chunk[-1] == b"":
            chunk.pop()
        lines.extend(chunk)
    if shuffle_seed is not None:
        random.Random(shuffle_seed).shuffle(lines)
    with open(out, "wb") as f:
        for line in lines:
            f.write(line + b"\n")


def replace_with_dictionary(
    corpus, dictionary: SeedDictionary, prob: float, seed: int, out
) -> int:
    """Independently replace each translatable token occurrence with
    probability `prob` by a uniformly chosen translation. Returns the number
    of replacements made."""
    if not dictionary.pairs:
        raise ValueError("replacement dictionary is empty")
    if not 0.0 <= prob <= 1.0:
        raise ValueError("replacement probability must lie in [0, 1]")
    translations = dictionary.by_source()
    rng = random.Random(seed)
    replaced = 0
    with open(corpus, encoding="utf-8") as fin, open(
        out, "w", encoding="utf-8", newline="\n"
    ) as fout:
        for line in fin:
            tokens = line.split()
            for i, tok in enumerate(tokens):
                options = translations.get(tok)
                if options and rng.random() < prob:
                    tokens[i] = options[rng.randrange(len(options))]
                    replaced += 1
            fout.write(" ".join(tokens) + "\n")
    logger.info("replaced %d token occurrences", replaced)
    return replaced
