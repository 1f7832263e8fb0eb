"""Minimal reader for the canonical corpus format.

Only the fields this package needs are read: document id and text. Span
fields are left untouched; they belong to the downstream consumer.
"""

from __future__ import annotations

import json
from typing import NamedTuple

from .errors import CorpusReadError


class CorpusDoc(NamedTuple):
    doc_id: str
    text: str


def load_corpus_texts(path) -> list[CorpusDoc]:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CorpusReadError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(data, list):
        raise CorpusReadError(f"{path}: expected a top-level list")
    docs: list[CorpusDoc] = []
    seen: set[str] = set()
    for i, record in enumerate(data):
        if not isinstance(record, dict):
            raise CorpusReadError(f"{path}: record {i}: expected an object")
        for field in ("id", "text"):
            if field not in record:
                raise CorpusReadError(f"{path}: record {i}: missing field {field!r}")
            if not isinstance(record[field], str):
                raise CorpusReadError(
                    f"{path}: record {i}: field {field!r} must be a string"
                )
        doc_id = record["id"]
        if doc_id in seen:
            raise CorpusReadError(f"{path}: duplicate document id {doc_id!r}")
        seen.add(doc_id)
        docs.append(CorpusDoc(doc_id=doc_id, text=record["text"]))
    return docs
