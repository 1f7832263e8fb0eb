"""Task data loading, rule tokenization, and span <-> BIO tag conversion.

Character offsets always count Unicode scalar values (Python string indices),
never bytes. Documents carry gold spans for two classes: "short" (the
abbreviated term) and "long" (the expanded phrase).
"""

from __future__ import annotations

import json
import logging
import unicodedata
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

from .errors import DataFormatError

logger = logging.getLogger(__name__)

LANGUAGES = ("da", "en", "fr", "es", "fa", "vi")
DOMAINS = ("scientific", "legal")

# The seven (language, domain) corpus slices; English is the only language
# present in both domains.
VALID_SLICES = frozenset(
    {
        ("da", "legal"),
        ("en", "scientific"),
        ("en", "legal"),
        ("fr", "legal"),
        ("es", "legal"),
        ("fa", "scientific"),
        ("vi", "scientific"),
    }
)

# Reporting order for per-slice tables ("all" is prepended where relevant).
SLICE_NAMES = ("da", "en-sci", "en-leg", "fr", "fa", "es", "vi")

# Tag inventory. Index 0 must stay "O": decoding tie-breaks rely on it.
TAGS = ("O", "B-short", "I-short", "B-long", "I-long")
TAG_TO_ID = {tag: i for i, tag in enumerate(TAGS)}


class CorpusFormatError(DataFormatError):
    pass


class CharSpan(NamedTuple):
    """Half-open character interval [start, end) into a document's text."""

    start: int
    end: int


class Token(NamedTuple):
    surface: str
    span: CharSpan


@dataclass
class Document:
    id: str
    text: str
    language: str
    domain: str
    short_spans: list[CharSpan]
    long_spans: list[CharSpan]


@dataclass
class TaggedSentence:
    """One training unit: the tokens of a document with one BIO tag each."""

    doc_id: str
    tokens: list[Token]
    tags: list[str]
    language: str
    domain: str


def slice_key(doc: Document) -> str:
    """Reporting slice of a document; English splits by domain."""
    if doc.language == "en":
        return "en-sci" if doc.domain == "scientific" else "en-leg"
    return doc.language


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def _is_paren(ch: str) -> bool:
    return unicodedata.category(ch) in ("Ps", "Pe")


def tokenize(text: str) -> list[Token]:
    """Deterministic rule tokenizer.

    Splits on Unicode whitespace, then splits off leading and trailing
    punctuation characters as single-character tokens; opening and closing
    bracket characters are always tokens of their own, wherever they appear.
    Token spans partition the non-whitespace characters of `text`.
    """
    tokens: list[Token] = []
    i, n = 0, len(text)
    while i < n:
        if text[i].isspace():
            i += 1
            continue
        j = i
        while j < n and not text[j].isspace():
            j += 1
        _split_chunk(text, i, j, tokens)
        i = j
    return tokens


def _split_chunk(text: str, start: int, end: int, out: list[Token]) -> None:
    run = start
    for k in range(start, end):
        if _is_paren(text[k]):
            if run < k:
                _split_run(text, run, k, out)
            out.append(Token(text[k], CharSpan(k, k + 1)))
            run = k + 1
    if run < end:
        _split_run(text, run, end, out)


def _split_run(text: str, start: int, end: int, out: list[Token]) -> None:
    left = start
    while left < end and _is_punct(text[left]):
        out.append(Token(text[left], CharSpan(left, left + 1)))
        left += 1
    right = end
    tail: list[Token] = []
    while right > left and _is_punct(text[right - 1]):
        tail.append(Token(text[right - 1], CharSpan(right - 1, right)))
        right -= 1
    if left < right:
        out.append(Token(text[left:right], CharSpan(left, right)))
    out.extend(reversed(tail))


def normalize_spans(spans: Iterable[Sequence[int]]) -> list[CharSpan]:
    """Sort spans and merge any that overlap by at least one character."""
    ordered = sorted(CharSpan(int(s), int(e)) for s, e in spans)
    merged: list[CharSpan] = []
    for span in ordered:
        if merged and span.start < merged[-1].end:
            last = merged[-1]
            merged[-1] = CharSpan(last.start, max(last.end, span.end))
        else:
            merged.append(span)
    return merged


def project_spans(
    tokens: Sequence[Token],
    short_spans: Sequence[CharSpan],
    long_spans: Sequence[CharSpan],
) -> list[str]:
    """Project gold character spans onto tokens as BIO tags.

    A token belongs to a span if they overlap by >= 1 character. The first
    token of a span gets B-x, later ones I-x. A token inside both a short
    and a long span is tagged short (and a warning is logged). The output is
    always valid BIO: a trailing repair pass promotes any I-x left without
    its opener by conflict resolution.
    """
    tags = ["O"] * len(tokens)
    claimed: list[str | None] = [None] * len(tokens)
    # long first, so the short class wins every overlap conflict
    for cls, spans in (("long", long_spans), ("short", short_spans)):
        for span in spans:
            first = True
            for idx, tok in enumerate(tokens):
                if tok.span.start < span.end and span.start < tok.span.end:
                    if claimed[idx] is not None and claimed[idx] != cls:
                        logger.warning(
                            "token %r overlaps both a short and a long span; keeping short",
                            tok.surface,
                        )
                    claimed[idx] = cls
                    tags[idx] = ("B-" if first else "I-") + cls
                    first = False
    for idx, tag in enumerate(tags):
        if tag.startswith("I-"):
            cls = tag[2:]
            prev = tags[idx - 1] if idx else "O"
            if prev not in ("B-" + cls, "I-" + cls):
                tags[idx] = "B-" + cls
    return tags


def decode_tags(
    tokens: Sequence[Token], tags: Sequence[str]
) -> tuple[list[CharSpan], list[CharSpan]]:
    """Turn a tag sequence back into character spans.

    Maximal runs of B-x (I-x)* become one span from the first token's start
    to the last token's end. Decoding is lenient: an I-x with no valid
    predecessor starts a new span, so any tag sequence over the inventory is
    accepted, valid BIO or not.
    """
    if len(tags) != len(tokens):
        raise ValueError(f"{len(tags)} tags for {len(tokens)} tokens")
    for tag in tags:
        if tag not in TAG_TO_ID:
            raise ValueError(f"unknown tag {tag!r}")
    short: list[CharSpan] = []
    long_: list[CharSpan] = []
    i = 0
    while i < len(tags):
        tag = tags[i]
        if tag == "O":
            i += 1
            continue
        cls = tag[2:]
        j = i + 1
        while j < len(tags) and tags[j] == "I-" + cls:
            j += 1
        span = CharSpan(tokens[i].span.start, tokens[j - 1].span.end)
        (short if cls == "short" else long_).append(span)
        i = j
    return short, long_


def sentences_from_documents(docs: Iterable[Document]) -> list[TaggedSentence]:
    """Tokenize documents and project their gold spans to BIO tags."""
    out = []
    for doc in docs:
        tokens = tokenize(doc.text)
        tags = project_spans(tokens, doc.short_spans, doc.long_spans)
        out.append(
            TaggedSentence(
                doc_id=doc.id,
                tokens=tokens,
                tags=tags,
                language=doc.language,
                domain=doc.domain,
            )
        )
    return out


def documents_from_records(records: list, origin: str) -> list[Document]:
    """Validate raw record dicts and build Documents.

    Raises CorpusFormatError naming the record index and offending field;
    span problems name the document id and span.
    """
    if not isinstance(records, list):
        raise CorpusFormatError(f"{origin}: expected a top-level list of records")
    docs: list[Document] = []
    seen: set[str] = set()
    for idx, rec in enumerate(records):
        docs.append(_parse_record(rec, idx, origin, seen))
    return docs


def _parse_record(rec, idx: int, origin: str, seen: set[str]) -> Document:
    if not isinstance(rec, dict):
        raise CorpusFormatError(f"{origin}: record {idx}: expected an object")

    def need(field: str, kind):
        if field not in rec:
            raise CorpusFormatError(f"{origin}: record {idx}: missing field {field!r}")
        value = rec[field]
        if not isinstance(value, kind):
            raise CorpusFormatError(
                f"{origin}: record {idx}: field {field!r} must be of type {kind.__name__}"
            )
        return value

    doc_id = need("id", str)
    text = need("text", str)
    language = need("language", str)
    domain = need("domain", str)
    if doc_id in seen:
        raise CorpusFormatError(f"{origin}: record {idx}: duplicate document id {doc_id!r}")
    seen.add(doc_id)
    if language not in LANGUAGES:
        raise CorpusFormatError(
            f"{origin}: record {idx}: field 'language' has unknown value {language!r}"
        )
    if domain not in DOMAINS:
        raise CorpusFormatError(
            f"{origin}: record {idx}: field 'domain' has unknown value {domain!r}"
        )
    if (language, domain) not in VALID_SLICES:
        raise CorpusFormatError(
            f"{origin}: record {idx}: no corpus slice pairs language {language!r} "
            f"with domain {domain!r}"
        )
    by_class: dict[str, list[CharSpan]] = {}
    for field in ("short", "long"):
        pairs = need(field, list)
        parsed = []
        for pair in pairs:
            ok = (
                isinstance(pair, (list, tuple))
                and len(pair) == 2
                and all(isinstance(v, int) and not isinstance(v, bool) for v in pair)
            )
            if not ok:
                raise CorpusFormatError(
                    f"{origin}: record {idx}: field {field!r} entries must be "
                    f"[start, end] integer pairs"
                )
            s, e = pair
            if not (0 <= s < e <= len(text)):
                raise CorpusFormatError(
                    f"{origin}: document {doc_id!r}: {field} span [{s}, {e}) out of "
                    f"bounds (text length {len(text)})"
                )
            parsed.append((s, e))
        by_class[field] = normalize_spans(parsed)
    return Document(
        id=doc_id,
        text=text,
        language=language,
        domain=domain,
        short_spans=by_class["short"],
        long_spans=by_class["long"],
    )


def load_corpus(path) -> list[Document]:
    """Load a corpus (or prediction) file in the canonical JSON layout."""
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CorpusFormatError(f"{path}: not valid JSON: {exc}") from exc
    return documents_from_records(raw, str(path))


def save_corpus(docs: Iterable[Document], path) -> None:
    """Write documents in the canonical layout (also used for predictions)."""
    records = [
        {
            "id": doc.id,
            "text": doc.text,
            "language": doc.language,
            "domain": doc.domain,
            "short": [[s, e] for s, e in doc.short_spans],
            "long": [[s, e] for s, e in doc.long_spans],
        }
        for doc in docs
    ]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(records, fh, ensure_ascii=False, indent=1)
        fh.write("\n")
