"""Per-token input vectors from a file of precomputed vectors or a hashed lookup.

Two providers share one read interface: ``vectors(doc_id, tokens)`` returns a
float64 matrix with one row per token.

The file provider serves records exported ahead of time into a simple binary
layout (see EmbeddingFile). The hashed provider is self-contained and
trainable: tokens seen at vocabulary-build time get dedicated rows, everything
else shares a fixed pool of hash-bucket rows, so the model runs without any
precomputed vectors at all.
"""

from __future__ import annotations

import struct
import unicodedata
from dataclasses import dataclass

import numpy as np

from .errors import DataFormatError
from .rng import SplitMix64

MAGIC = b"AEEM"
FORMAT_VERSION = 1
OOV_BUCKETS = 1 << 16
DEFAULT_HASHED_DIM = 128


class EmbeddingFormatError(DataFormatError):
    """Header or record structure is not the expected layout."""


class EmbeddingCorruptionError(DataFormatError):
    """File ends mid-record or a record cannot be decoded."""


class MissingEmbeddingError(DataFormatError):
    """A document id has no record in the file."""


class TokenAlignmentError(DataFormatError):
    """A record's stored token count disagrees with the tokenizer's."""


def normalize_key(token: str) -> str:
    return unicodedata.normalize("NFC", token).lower()


def fnv1a_64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for byte in data:
        h ^= byte
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def oov_bucket(key: str) -> int:
    return fnv1a_64(key.encode("utf-8")) % OOV_BUCKETS


def write_embedding_file(path, dim: int, records) -> None:
    """Write (doc_id, matrix) pairs; matrices are stored as float32.

    Each matrix must be (token_count, dim); token_count may be zero.
    """
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", FORMAT_VERSION, dim))
        for doc_id, matrix in records:
            m = np.asarray(matrix, dtype=np.float32)
            if m.ndim != 2 or m.shape[1] != dim:
                raise ValueError(
                    f"record {doc_id!r}: matrix shape {m.shape} does not match dim {dim}"
                )
            id_bytes = doc_id.encode("utf-8")
            fh.write(struct.pack("<I", len(id_bytes)))
            fh.write(id_bytes)
            fh.write(struct.pack("<I", m.shape[0]))
            fh.write(m.astype("<f4", copy=False).tobytes(order="C"))


class EmbeddingFile:
    """Read handle over an embedding file; lazy per-record reads by offset."""

    def __init__(self, path, dim: int, index: dict[str, tuple[int, int]]):
        self.path = path
        self.dim = dim
        self._index = index

    def __len__(self) -> int:
        return len(self._index)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._index

    def doc_ids(self):
        return list(self._index)

    def token_count(self, doc_id: str) -> int:
        if doc_id not in self._index:
            raise MissingEmbeddingError(f"no embedding record for document {doc_id!r}")
        return self._index[doc_id][1]

    def lookup(self, doc_id: str, expected_token_count: int) -> np.ndarray:
        """Record matrix as float64, validated against the expected row count."""
        if doc_id not in self._index:
            raise MissingEmbeddingError(f"no embedding record for document {doc_id!r}")
        offset, count = self._index[doc_id]
        if count != expected_token_count:
            raise TokenAlignmentError(
                f"document {doc_id!r}: stored token count {count} != expected "
                f"{expected_token_count}"
            )
        with open(self.path, "rb") as fh:
            fh.seek(offset)
            raw = fh.read(count * self.dim * 4)
        matrix = np.frombuffer(raw, dtype="<f4").reshape(count, self.dim)
        return matrix.astype(np.float64)


def open_embedding_file(path) -> EmbeddingFile:
    """Validate the header and index every record in one forward scan."""
    with open(path, "rb") as fh:
        header = fh.read(12)
        if len(header) < 12:
            raise EmbeddingFormatError(f"{path}: file too short for a header")
        if header[:4] != MAGIC:
            raise EmbeddingFormatError(
                f"{path}: bad magic {header[:4]!r}, expected {MAGIC!r}"
            )
        version, dim = struct.unpack("<II", header[4:12])
        if version != FORMAT_VERSION:
            raise EmbeddingFormatError(
                f"{path}: unsupported format version {version}, expected {FORMAT_VERSION}"
            )
        if dim < 1:
            raise EmbeddingFormatError(f"{path}: header dim must be >= 1, got {dim}")

        fh.seek(0, 2)
        file_size = fh.tell()
        fh.seek(12)
        index: dict[str, tuple[int, int]] = {}
        pos = 12
        while pos < file_size:
            head = fh.read(4)
            if len(head) < 4:
                raise EmbeddingCorruptionError(
                    f"{path}: truncated record header at offset {pos}"
                )
            (id_len,) = struct.unpack("<I", head)
            id_bytes = fh.read(id_len)
            count_bytes = fh.read(4)
            if len(id_bytes) < id_len or len(count_bytes) < 4:
                raise EmbeddingCorruptionError(
                    f"{path}: truncated record at offset {pos}"
                )
            try:
                doc_id = id_bytes.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise EmbeddingCorruptionError(
                    f"{path}: undecodable record id at offset {pos}: {exc}"
                ) from exc
            (count,) = struct.unpack("<I", count_bytes)
            matrix_offset = pos + 4 + id_len + 4
            matrix_size = count * dim * 4
            if matrix_offset + matrix_size > file_size:
                raise EmbeddingCorruptionError(
                    f"{path}: record {doc_id!r} truncated mid-matrix at offset "
                    f"{matrix_offset}"
                )
            if doc_id in index:
                raise EmbeddingFormatError(
                    f"{path}: duplicate record id {doc_id!r} at offset {pos}"
                )
            index[doc_id] = (matrix_offset, count)
            pos = matrix_offset + matrix_size
            fh.seek(pos)
    return EmbeddingFile(path, dim, index)


@dataclass
class HashedLookupParams:
    """Trainable rows: one per vocabulary key, plus a shared hash-bucket pool."""

    vocab: dict[str, int]  # normalized key -> row index, first-seen order
    matrix: np.ndarray  # (len(vocab) + OOV_BUCKETS, dim) float64

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def row_id(self, token: str) -> int:
        key = normalize_key(token)
        row = self.vocab.get(key)
        if row is None:
            return len(self.vocab) + oov_bucket(key)
        return row

    def row_ids(self, tokens) -> np.ndarray:
        return np.array([self.row_id(t) for t in tokens], dtype=np.int64)


def build_vocab(token_sequences) -> dict[str, int]:
    """Normalized keys in first-seen order across the given token sequences."""
    vocab: dict[str, int] = {}
    for tokens in token_sequences:
        for token in tokens:
            key = normalize_key(token)
            if key not in vocab:
                vocab[key] = len(vocab)
    return vocab


def new_hashed_lookup(vocab: dict[str, int], dim: int, rng: SplitMix64) -> HashedLookupParams:
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    rows = len(vocab) + OOV_BUCKETS
    scale = 1.0 / np.sqrt(dim)
    matrix = rng.uniform(-scale, scale, (rows, dim))
    return HashedLookupParams(vocab=dict(vocab), matrix=matrix)


class FileProvider:
    """Serves frozen vectors from an opened embedding file."""

    kind = "file"

    def __init__(self, emb_file: EmbeddingFile):
        self.file = emb_file

    @property
    def dim(self) -> int:
        return self.file.dim

    def vectors(self, doc_id: str, tokens) -> np.ndarray:
        return self.file.lookup(doc_id, len(tokens))


class HashedProvider:
    """Serves rows of a trainable lookup matrix; OOV tokens share hashed rows."""

    kind = "hashed"

    def __init__(self, params: HashedLookupParams):
        self.params = params

    @property
    def dim(self) -> int:
        return self.params.dim

    def row_ids(self, tokens) -> np.ndarray:
        return self.params.row_ids(tokens)

    def vectors(self, doc_id: str, tokens) -> np.ndarray:
        rows = self.params.row_ids(tokens)
        return self.params.matrix[rows].copy()


def accumulate_row_grads(
    grad_matrix: np.ndarray, row_ids: np.ndarray, grad_vectors: np.ndarray
) -> None:
    """Add per-token gradients into their rows; repeated rows accumulate."""
    np.add.at(grad_matrix, row_ids, grad_vectors)
