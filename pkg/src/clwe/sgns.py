"""Skip-gram negative-sampling trainer over a fixed (typically joint)
vocabulary.

Tokens present in both languages' corpora hold a single row, so training on
concatenated corpora ties the two languages through those rows. The update
rule is the classic one: for an (input, output) pair with label y and
score f = syn0[input] . syn1[output], each side moves by
(y - sigmoid(f)) * lr times the other side. Negatives are drawn from the
unigram^0.75 distribution via a power-of-two sampling table, frequent
tokens are occurrence-subsampled, and the window width is re-drawn
uniformly per center word. All randomness comes from the 64-bit linear
congruential generator word2vec uses, so `deterministic_single` mode is a
pure function of the corpus bytes and the config.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from numba import get_num_threads, njit, prange

from .corpus import JointVocabulary
from .embed_io import EmbeddingSet, Vocabulary

logger = logging.getLogger("clwe.sgns")

_TABLE_SIZE = 1 << 23

_MULT = np.uint64(25214903917)
_INC = np.uint64(11)
_SHIFT16 = np.uint64(16)
_MASK16 = np.uint64(0xFFFF)
_TABLE_MASK = np.uint64(_TABLE_SIZE - 1)


@dataclass
class TrainConfig:
    dim: int = 64
    window: int = 5
    negatives: int = 5
    epochs: int = 5
    learning_rate: float = 0.05
    subsample_t: float = 1e-4
    min_count: int = 5
    seed: int = 1
    mode: str = "deterministic_single"
    lowercase: bool = False

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be at least 1")
        if self.window < 1:
            raise ValueError("window must be at least 1")
        if self.negatives < 1:
            raise ValueError("need at least one negative sample")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.subsample_t <= 0:
            raise ValueError("subsample threshold must be positive")
        if self.mode not in ("deterministic_single", "parallel_lockfree"):
            raise ValueError(f"unknown thread mode {self.mode!r}")


@dataclass
class TrainStats:
    epoch_loss: list[float] = field(default_factory=list)
    epoch_pairs: list[int] = field(default_factory=list)


def subsample_keep_prob(count: int, total: int, t: float) -> float:
    """Occurrence keep probability min(1, sqrt(t*T/C) + t*T/C); monotone
    decreasing in the count."""
    if count < 1 or total < count:
        raise ValueError("need 1 <= count <= total")
    if t <= 0:
        raise ValueError("threshold must be positive")
    ratio = t * total / count
    return min(1.0, math.sqrt(ratio) + ratio)


def _mix_seed(seed: int, salt: int) -> np.uint64:
    """SplitMix64 of (seed, salt), for independent per-epoch/chunk streams."""
    x = (seed * 0x9E3779B97F4A7C15 + salt * 0xBF58476D1CE4E5B9 + 0x94D049BB133111EB) & (
        (1 << 64) - 1
    )
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & ((1 << 64) - 1)
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & ((1 << 64) - 1)
    x ^= x >> 31
    return np.uint64(x | 1)


@njit(cache=True, fastmath=True)
def _train_chunk(
    tokens,
    offsets,
    sent_lo,
    sent_hi,
    syn0,
    syn1,
    keep_prob,
    neg_table,
    window,
    negatives,
    alpha0,
    alpha_min,
    words_done_start,
    words_total,
    state,
    max_len,
):
    d = syn0.shape[1]
    sen = np.empty(max_len, np.int32)
    neu1e = np.empty(d, np.float32)
    loss_sum = 0.0
    pair_count = 0
    words_read = 0
    alpha = alpha0
    for si in range(sent_lo, sent_hi):
        progress = (words_done_start + words_read) / words_total
        alpha = alpha0 * (1.0 - progress)
        if alpha < alpha_min:
            alpha = alpha_min
        m = 0
        for p in range(offsets[si], offsets[si + 1]):
            w = tokens[p]
            words_read += 1
            if keep_prob[w] < 1.0:
                state = state * _MULT + _INC
                u = float((state >> _SHIFT16) & _MASK16) / 65536.0
                if u >= keep_prob[w]:
                    continue
            sen[m] = w
            m += 1
        for pos in range(m):
            word = sen[pos]
            state = state * _MULT + _INC
            b = int(state % np.uint64(window))
            for a in range(b, 2 * window + 1 - b):
                if a == window:
                    continue
                c = pos - window + a
                if c < 0 or c >= m:
                    continue
                last = sen[c]
                for j in range(d):
                    neu1e[j] = 0.0
                for neg in range(negatives + 1):
                    if neg == 0:
                        target = word
                        label = 1.0
                    else:
                        state = state * _MULT + _INC
                        target = neg_table[int((state >> _SHIFT16) & _TABLE_MASK)]
                        if target == word:
                            continue
                        label = 0.0
                    f = 0.0
                    for j in range(d):
                        f += float(syn0[last, j]) * float(syn1[target, j])
                    if f > 30.0:
                        f = 30.0
                    elif f < -30.0:
                        f = -30.0
                    sig = 1.0 / (1.0 + math.exp(-f))
                    if label > 0.5:
                        loss_sum += -math.log(sig + 1e-12)
                    else:
                        loss_sum += -math.log(1.0 - sig + 1e-12)
                    g = np.float32((label - sig) * alpha)
                    for j in range(d):
                        neu1e[j] += g * syn1[target, j]
                    for j in range(d):
                        syn1[target, j] += g * syn0[last, j]
                for j in range(d):
                    syn0[last, j] += neu1e[j]
                pair_count += 1
    return loss_sum, pair_count, words_read


@njit(cache=True, parallel=True, fastmath=True)
def _train_epoch_parallel(
    tokens,
    offsets,
    bounds,
    word_base,
    syn0,
    syn1,
    keep_prob,
    neg_table,
    window,
    negatives,
    alpha0,
    alpha_min,
    words_done_start,
    words_total,
    states,
    max_len,
    loss_out,
    pairs_out,
):
    n_chunks = bounds.shape[0] - 1
    for ci in prange(n_chunks):
        loss, pairs, _ = _train_chunk(
            tokens,
            offsets,
            bounds[ci],
            bounds[ci + 1],
            syn0,
            syn1,
            keep_prob,
            neg_table,
            window,
            negatives,
            alpha0,
            alpha_min,
            words_done_start + word_base[ci],
            words_total,
            states[ci],
            max_len,
        )
        loss_out[ci] = loss
        pairs_out[ci] = pairs


def _vocab_tokens(vocab) -> list[str]:
    if isinstance(vocab, (Vocabulary, JointVocabulary)):
        return list(vocab.tokens)
    raise TypeError("vocab must be a Vocabulary or JointVocabulary")


def _encode_corpus(corpus, token_to_id: dict[str, int], lowercase: bool):
    flat: list[int] = []
    offsets = [0]
    with open(corpus, encoding="utf-8") as f:
        for line in f:
            if lowercase:
                line = line.lower()
            ids = [token_to_id[t] for t in line.split() if t in token_to_id]
            if not ids:
                continue
            flat.extend(ids)
            offsets.append(len(flat))
    return np.array(flat, dtype=np.int32), np.array(offsets, dtype=np.int64)


def _negative_table(counts: np.ndarray) -> np.ndarray:
    weights = counts.astype(np.float64) ** 0.75
    cum = np.cumsum(weights / weights.sum())
    probe = (np.arange(_TABLE_SIZE) + 0.5) / _TABLE_SIZE
    return np.searchsorted(cum, probe).astype(np.int32)


def train_sgns(
    corpus,
    vocab,
    config: TrainConfig,
    with_stats: bool = False,
):
    """Train embeddings for the given vocabulary on a one-sentence-per-line
    corpus; returns the input-vector table as an EmbeddingSet.

    Corpus tokens outside the vocabulary are skipped; vocabulary tokens
    occurring fewer than `min_count` times in the corpus are not trained.
    Shared tokens of a joint vocabulary receive exactly one row. With
    `with_stats=True` also returns per-epoch mean losses.
    """
    tokens_order = _vocab_tokens(vocab)
    counts: Counter[str] = Counter()
    with open(corpus, encoding="utf-8") as f:
        vocab_set = set(tokens_order)
        for line in f:
            if config.lowercase:
                line = line.lower()
            counts.update(t for t in line.split() if t in vocab_set)
    floor = max(1, config.min_count)
    kept = [t for t in tokens_order if counts[t] >= floor]
    if not kept:
        raise ValueError("no vocabulary token occurs often enough in the corpus")
    token_to_id = {t: i for i, t in enumerate(kept)}
    kept_counts = np.array([counts[t] for t in kept], dtype=np.int64)
    total = int(kept_counts.sum())

    token_ids, offsets = _encode_corpus(corpus, token_to_id, config.lowercase)
    if token_ids.size == 0:
        raise ValueError("corpus is empty after vocabulary filtering")
    max_len = int(np.max(np.diff(offsets)))

    keep_prob = np.array(
        [subsample_keep_prob(int(c), total, config.subsample_t) for c in kept_counts]
    )
    neg_table = _negative_table(kept_counts)

    rs = np.random.RandomState(config.seed % (2**32))
    syn0 = ((rs.rand(len(kept), config.dim) - 0.5) / config.dim).astype(np.float32)
    syn1 = np.zeros((len(kept), config.dim), dtype=np.float32)

    n_sent = offsets.shape[0] - 1
    words_total = float(config.epochs * token_ids.size + 1)
    alpha_min = config.learning_rate * 1e-4
    stats = TrainStats()

    for epoch in range(config.epochs):
        words_done = epoch * token_ids.size
        if config.mode == "deterministic_single":
            loss, pairs, _ = _train_chunk(
                token_ids, offsets, 0, n_sent, syn0, syn1, keep_prob, neg_table,
                config.window, config.negatives, config.learning_rate, alpha_min,
                float(words_done), words_total, _mix_seed(config.seed, epoch), max_len,
            )
        else:
            n_chunks = min(max(1, get_num_threads()), n_sent)
            bounds = np.linspace(0, n_sent, n_chunks + 1).astype(np.int64)
            word_base = offsets[bounds[:-1]].astype(np.float64)
            states = np.array(
                [_mix_seed(config.seed, epoch * 65537 + ci + 1) for ci in range(n_chunks)],
                dtype=np.uint64,
            )
            loss_out = np.zeros(n_chunks)
            pairs_out = np.zeros(n_chunks, dtype=np.int64)
            _train_epoch_parallel(
                token_ids, offsets, bounds, word_base, syn0, syn1, keep_prob, neg_table,
                config.window, config.negatives, config.learning_rate, alpha_min,
                float(words_done), words_total, states, max_len, loss_out, pairs_out,
            )
            loss, pairs = float(loss_out.sum()), int(pairs_out.sum())
        mean_loss = loss / pairs if pairs else 0.0
        stats.epoch_loss.append(mean_loss)
        stats.epoch_pairs.append(int(pairs))
        logger.info("epoch %d/%d: %d pairs, mean loss %.4f",
                    epoch + 1, config.epochs, pairs, mean_loss)

    emb = EmbeddingSet(Vocabulary(kept), syn0)
    return (emb, stats) if with_stats else emb


def sgns_example_loss(
    center: np.ndarray, context: np.ndarray, negatives: np.ndarray
) -> float:
    """Loss of one (center, context, negatives) example at f64 precision:
    -log sigmoid(u_ctx . v) - sum_i log sigmoid(-u_neg_i . v)."""
    def logsig(x):
        return -np.logaddexp(0.0, -x)

    pos = logsig(float(context @ center))
    neg = logsig(-(negatives @ center)).sum()
    return float(-(pos + neg))


def sgns_example_gradients(
    center: np.ndarray, context: np.ndarray, negatives: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Analytic gradients of `sgns_example_loss` w.r.t. the center vector,
    the context output vector, and each negative output vector."""
    sig_pos = 1.0 / (1.0 + np.exp(-float(context @ center)))
    sig_neg = 1.0 / (1.0 + np.exp(-(negatives @ center)))
    g_center = (sig_pos - 1.0) * context + negatives.T @ sig_neg
    g_context = (sig_pos - 1.0) * center
    g_negatives = sig_neg[:, None] * center[None, :]
    return g_center, g_context, g_negatives
