"""Word-aligned contextual embedding export.

Each document's full text is subword-encoded and run through the encoder;
subtoken vectors are then pooled into exactly one vector per word of the
word tokenizer, matched by character offsets. Documents whose subtoken
sequence exceeds the encoder window are encoded in overlapping windows
(stride of half a window) and every word reads its vectors from the window
where it sits most centrally.
"""

from __future__ import annotations

import logging

import numpy as np
import torch
from transformers import AutoModel, AutoTokenizer

from .aeem import write_embedding_file
from .config import ExporterConfig
from .corpus_io import load_corpus_texts
from .mlm import _effective_max_length
from .wordtok import WordSpan, word_tokenize

logger = logging.getLogger(__name__)


def plan_windows(count: int, capacity: int, stride: int) -> list[tuple[int, int]]:
    """Half-open [start, end) subtoken windows jointly covering range(count)."""
    if capacity < 1 or stride < 1:
        raise ValueError("capacity and stride must be >= 1")
    if count <= capacity:
        return [(0, count)]
    windows = []
    start = 0
    while True:
        end = min(start + capacity, count)
        windows.append((start, end))
        if end == count:
            return windows
        start += stride


def covering_subtokens(word: WordSpan, offsets) -> list[int]:
    """Indices of subtokens sharing at least one character with the word."""
    out = []
    for i, (a, b) in enumerate(offsets):
        if a < word.end and word.start < b:
            out.append(i)
    return out


def pick_window(indices: list[int], windows: list[tuple[int, int]]) -> int:
    """Window where the given subtoken run sits most centrally.

    Prefers windows containing the whole run; a run longer than any window
    falls back to windows containing the run's center. Ties go to the
    earlier window.
    """
    center = sum(indices) / len(indices)
    candidates = [
        k for k, (a, b) in enumerate(windows)
        if indices[0] >= a and indices[-1] < b
    ]
    if not candidates:
        mid = min(indices, key=lambda i: abs(i - center))
        candidates = [k for k, (a, b) in enumerate(windows) if a <= mid < b]
    return min(
        candidates,
        key=lambda k: (abs(center - (windows[k][0] + windows[k][1] - 1) / 2.0), k),
    )


def _nearest_subtoken(word: WordSpan, offsets) -> int:
    def gap(span):
        a, b = span
        if a >= word.end:
            return a - word.end
        if b <= word.start:
            return word.start - b
        return 0

    return min(range(len(offsets)), key=lambda i: (gap(offsets[i]), i))


def pool_document(
    words: list[WordSpan],
    offsets,
    windows: list[tuple[int, int]],
    window_vectors: list[np.ndarray],
    pooling: str,
    doc_id: str,
) -> np.ndarray:
    """One pooled vector per word; returns a (len(words), dim) matrix."""
    dim = window_vectors[0].shape[1]
    out = np.zeros((len(words), dim), dtype=np.float32)
    for w, word in enumerate(words):
        indices = covering_subtokens(word, offsets)
        if not indices:
            indices = [_nearest_subtoken(word, offsets)]
            logger.warning(
                "document %r: word %r at [%d, %d) has no covering subtoken; "
                "using the nearest one",
                doc_id, word.surface, word.start, word.end,
            )
        k = pick_window(indices, windows)
        a, b = windows[k]
        present = [i for i in indices if a <= i < b]
        vecs = window_vectors[k][[i - a for i in present]]
        if pooling == "first-subtoken":
            out[w] = vecs[0]
        else:
            out[w] = vecs.mean(axis=0)
    return out


def _encode_document(model, tokenizer, text: str, capacity: int):
    """Subtoken offsets, windows, and per-window hidden states for one text."""
    enc = tokenizer(text, add_special_tokens=False, return_offsets_mapping=True)
    ids = enc["input_ids"]
    offsets = enc["offset_mapping"]
    if not ids:
        return [], [], []
    windows = plan_windows(len(ids), capacity, max(1, capacity // 2))
    cls_id, sep_id = tokenizer.cls_token_id, tokenizer.sep_token_id
    vectors = []
    for a, b in windows:
        input_ids = torch.tensor([[cls_id, *ids[a:b], sep_id]])
        hidden = model(input_ids=input_ids).last_hidden_state[0, 1:-1]
        vectors.append(hidden.numpy().astype(np.float32))
    return offsets, windows, vectors


def export_embeddings(checkpoint, corpus_path, config: ExporterConfig) -> tuple[str, int]:
    """Write one embedding record per corpus document; returns (path, dim)."""
    config.validate()
    torch.manual_seed(config.seed)
    tokenizer = AutoTokenizer.from_pretrained(checkpoint)
    model = AutoModel.from_pretrained(checkpoint)
    model.eval()
    dim = model.config.hidden_size
    capacity = _effective_max_length(tokenizer, config) - 2
    docs = load_corpus_texts(corpus_path)

    def records():
        with torch.no_grad():
            for doc in docs:
                words = word_tokenize(doc.text)
                if not words:
                    yield doc.doc_id, np.zeros((0, dim), dtype=np.float32)
                    continue
                offsets, windows, vectors = _encode_document(
                    model, tokenizer, doc.text, capacity
                )
                if not windows:
                    logger.warning(
                        "document %r: text produced no subtokens; writing zeros",
                        doc.doc_id,
                    )
                    yield doc.doc_id, np.zeros((len(words), dim), dtype=np.float32)
                    continue
                yield doc.doc_id, pool_document(
                    words, offsets, windows, vectors, config.pooling, doc.doc_id
                )

    write_embedding_file(config.output_path, dim, records())
    logger.info("exported %d documents to %s (dim %d)", len(docs), config.output_path, dim)
    return str(config.output_path), dim
