"""Multilingual acronym and long-form extraction.

A BiLSTM-CRF span tagger over six languages and two domains, with all
forward/backward math written out by hand on float64 numpy arrays. Input
vectors come either from a binary file of precomputed contextual embeddings
or from a self-contained trainable hashed lookup.
"""

from .corpus import (
    CharSpan,
    Document,
    TaggedSentence,
    Token,
    decode_tags,
    load_corpus,
    project_spans,
    save_corpus,
    tokenize,
)
from .errors import AcroexError, ConfigError, DataFormatError, TrainingError
from .model import (
    Model,
    ModelConfig,
    load_checkpoint,
    new_model,
    predict_document,
    save_checkpoint,
)
from .scorer import PRF, ScoreReport, score_corpus
from .trainer import EpochReport, TrainConfig, evaluate, train

__version__ = "0.1.0"

__all__ = [
    "AcroexError",
    "CharSpan",
    "ConfigError",
    "DataFormatError",
    "Document",
    "EpochReport",
    "Model",
    "ModelConfig",
    "PRF",
    "ScoreReport",
    "TaggedSentence",
    "Token",
    "TrainConfig",
    "TrainingError",
    "decode_tags",
    "evaluate",
    "load_checkpoint",
    "load_corpus",
    "new_model",
    "predict_document",
    "project_spans",
    "save_checkpoint",
    "save_corpus",
    "score_corpus",
    "tokenize",
    "train",
    "__version__",
]
