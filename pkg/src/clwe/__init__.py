"""Cross-lingual word embedding toolkit.

Builds a single embedding space for two languages by training on their
concatenated corpora with a shared vocabulary, then repairs that space:
skewed-frequency shared tokens are moved back to a language-exclusive
vocabulary, and the language-exclusive part of the space is rotated onto
the other side with an orthogonal map learned from a seed dictionary or
bootstrapped with CSLS self-learning. Includes a bilingual lexicon
induction evaluation harness and an extension that aligns dumped
contextual features layer by layer.
"""

__version__ = "0.1.0"

from .embed_io import EmbeddingSet, Vocabulary, load_embeddings, save_embeddings
from .corpus import CorpusStats, JointVocabulary, build_joint_vocab, count_tokens
from .dictionaries import SeedDictionary, load_dictionary, save_dictionary
from .realloc import ReallocatedVocabulary, count_ratio, reallocate, split_embeddings
from .align import (
    AlignmentMatrix,
    apply_alignment,
    build_training_matrices,
    induce_dictionary,
    procrustes,
    refine_unsupervised,
    solve_linear,
)
from .retrieval import BLIReport, cosine_knn, csls, evaluate_bli
from .sgns import TrainConfig, train_sgns

__all__ = [
    "AlignmentMatrix",
    "BLIReport",
    "CorpusStats",
    "EmbeddingSet",
    "JointVocabulary",
    "ReallocatedVocabulary",
    "SeedDictionary",
    "TrainConfig",
    "Vocabulary",
    "apply_alignment",
    "build_joint_vocab",
    "build_training_matrices",
    "cosine_knn",
    "count_ratio",
    "count_tokens",
    "csls",
    "evaluate_bli",
    "induce_dictionary",
    "load_dictionary",
    "load_embeddings",
    "procrustes",
    "reallocate",
    "refine_unsupervised",
    "save_dictionary",
    "save_embeddings",
    "solve_linear",
    "split_embeddings",
    "train_sgns",
]
