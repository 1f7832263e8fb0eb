"""Writer for the binary embedding file the downstream consumer reads.

Layout: magic "AEEM", format version u32, dim u32, then per record an
id-length u32, the UTF-8 id bytes, a row count u32, and count*dim float32
values, row-major. All integers little-endian.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import ExporterError

MAGIC = b"AEEM"
FORMAT_VERSION = 1


def write_embedding_file(path, dim: int, records) -> None:
    """Stream (doc_id, matrix) pairs to path; matrices stored as float32."""
    if dim < 1:
        raise ExporterError(f"dim must be >= 1, got {dim}")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", FORMAT_VERSION, dim))
        for doc_id, matrix in records:
            rows = np.ascontiguousarray(matrix, dtype="<f4")
            if rows.ndim != 2 or rows.shape[1] != dim:
                raise ExporterError(
                    f"record {doc_id!r}: expected shape (n, {dim}), got {rows.shape}"
                )
            raw = doc_id.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<I", rows.shape[0]))
            fh.write(rows.tobytes(order="C"))
