"""Contextual word embedding exporter for the acronym extraction toolkit.

Adapts a pretrained masked-LM encoder to corpus text and writes one
word-aligned embedding record per document in the binary format the
extraction model reads.
"""

from .aeem import write_embedding_file
from .config import POOLING_MODES, ExporterConfig
from .corpus_io import CorpusDoc, load_corpus_texts
from .errors import CorpusReadError, ExporterConfigError, ExporterError
from .export import export_embeddings
from .mlm import adapt_mlm, heldout_mlm_loss
from .wordtok import WordSpan, word_tokenize

__all__ = [
    "CorpusDoc",
    "CorpusReadError",
    "ExporterConfig",
    "ExporterConfigError",
    "ExporterError",
    "POOLING_MODES",
    "WordSpan",
    "adapt_mlm",
    "export_embeddings",
    "heldout_mlm_loss",
    "load_corpus_texts",
    "word_tokenize",
    "write_embedding_file",
]
