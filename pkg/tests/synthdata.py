"""Synthetic cipher-language corpora for end-to-end tests.

Text is sampled by random walks on a fixed "friendship" graph whose edges
are drawn with Zipf-weighted preference, so every word has a unique,
learnable co-occurrence profile and realistic frequency skew. A second
language is an independent sample from the same graph with tokens renamed,
except for a configurable share of frequent anchor tokens that keep their
surface form. Optionally, a set of ambiguous tokens reuses a frequent
source surface for a rare target role, planting oversharing with a skewed
count ratio.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class CipherWorld:
    n_vocab: int
    friends: np.ndarray
    start_weights: np.ndarray
    anchor_ids: np.ndarray
    ambiguous_src: np.ndarray = field(default_factory=lambda: np.array([], dtype=int))
    ambiguous_tgt_role: np.ndarray = field(default_factory=lambda: np.array([], dtype=int))

    def l1_surface(self, word_id: int) -> str:
        return f"w{word_id}"

    def l2_surface(self, word_id: int) -> str:
        idx = np.searchsorted(self.ambiguous_tgt_role, word_id)
        if idx < len(self.ambiguous_tgt_role) and self.ambiguous_tgt_role[idx] == word_id:
            # rare role written with a frequent source surface (oversharing)
            return f"w{self.ambiguous_src[idx]}"
        if word_id in self.anchor_set:
            return f"w{word_id}"
        return f"q{word_id}"

    @property
    def anchor_set(self) -> set:
        if not hasattr(self, "_anchor_set"):
            self._anchor_set = set(int(a) for a in self.anchor_ids)
        return self._anchor_set

    def non_shared_ids(self) -> np.ndarray:
        blocked = self.anchor_set | set(int(i) for i in self.ambiguous_src)
        blocked |= set(int(i) for i in self.ambiguous_tgt_role)
        return np.array([i for i in range(self.n_vocab) if i not in blocked])


def make_world(
    n_vocab: int = 2000,
    n_friends: int = 15,
    anchor_fraction: float = 0.2,
    graph_seed: int = 13,
    n_ambiguous: int = 0,
    ambiguous_src_lo: int = 100,
) -> CipherWorld:
    rng = np.random.RandomState(graph_seed)
    weights = 1.0 / (np.arange(n_vocab) + 5.0)
    weights /= weights.sum()
    friends = np.empty((n_vocab, n_friends), dtype=np.int64)
    for i in range(n_vocab):
        friends[i] = rng.choice(n_vocab, size=n_friends, replace=False, p=weights)

    ambiguous_src = np.arange(ambiguous_src_lo, ambiguous_src_lo + n_ambiguous)
    ambiguous_tgt_role = np.arange(n_vocab - n_ambiguous, n_vocab)
    n_anchor = int(anchor_fraction * n_vocab)
    candidates = [i for i in range(n_vocab) if i not in set(ambiguous_src)]
    anchor_ids = np.array(candidates[:n_anchor])
    return CipherWorld(
        n_vocab, friends, weights, anchor_ids, ambiguous_src, ambiguous_tgt_role
    )


def sample_walks(world: CipherWorld, n_tokens: int, seed: int, sent_len: int = 12):
    """All sentences advanced in lockstep: column t of the id matrix is step
    t of every walk."""
    rng = np.random.RandomState(seed)
    n_sent = max(1, n_tokens // sent_len)
    cur = rng.choice(world.n_vocab, size=n_sent, p=world.start_weights)
    cols = [cur]
    for _ in range(sent_len - 1):
        pick = rng.randint(0, world.friends.shape[1], size=n_sent)
        cur = world.friends[cur, pick]
        cols.append(cur)
    return np.stack(cols, axis=1)


def write_corpus(world: CipherWorld, ids: np.ndarray, path, side: int) -> None:
    if side == 1:
        surfaces = [world.l1_surface(i) for i in range(world.n_vocab)]
    else:
        surfaces = [world.l2_surface(i) for i in range(world.n_vocab)]
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for row in ids:
            f.write(" ".join(surfaces[i] for i in row) + "\n")


def write_test_dictionary(world: CipherWorld, path, n_pairs: int, seed: int,
                          include_ambiguous: bool = False,
                          max_rank: int | None = None) -> list[tuple[str, str]]:
    """Planted gold pairs over non-shared words: (w<i>, q<i>); optionally the
    ambiguous pairs (w<i>, q<i>) whose surface is overshared. `max_rank`
    restricts queries to the more frequent ranks, as BLI test sets do."""
    rng = np.random.RandomState(seed)
    pool = world.non_shared_ids()
    if max_rank is not None:
        pool = pool[pool < max_rank]
    chosen = rng.choice(pool, size=min(n_pairs, len(pool)), replace=False)
    pairs = [(f"w{i}", f"q{i}") for i in sorted(int(c) for c in chosen)]
    if include_ambiguous:
        pairs += [(f"w{i}", f"q{i}") for i in world.ambiguous_src]
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for s, t in pairs:
            f.write(f"{s}\t{t}\n")
    return pairs
