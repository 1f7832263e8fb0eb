"""Word tokenizer matching the downstream consumer's rules exactly.

The embedding file pairs one vector with each word the consumer sees, so the
two tokenizers must agree on every document. Rules: split on Unicode
whitespace; opening and closing bracket characters always stand alone;
leading and trailing punctuation peels off as single-character tokens. Word
spans are character offsets into the original text.
"""

from __future__ import annotations

import unicodedata
from typing import NamedTuple


class WordSpan(NamedTuple):
    surface: str
    start: int
    end: int


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def _is_paren(ch: str) -> bool:
    return unicodedata.category(ch) in ("Ps", "Pe")


def _split_run(text: str, start: int, end: int, out: list[WordSpan]) -> None:
    left = start
    while left < end and _is_punct(text[left]):
        out.append(WordSpan(text[left], left, left + 1))
        left += 1
    right = end
    tail: list[WordSpan] = []
    while right > left and _is_punct(text[right - 1]):
        tail.append(WordSpan(text[right - 1], right - 1, right))
        right -= 1
    if left < right:
        out.append(WordSpan(text[left:right], left, right))
    out.extend(reversed(tail))


def _split_chunk(text: str, start: int, end: int, out: list[WordSpan]) -> None:
    run = start
    for k in range(start, end):
        if _is_paren(text[k]):
            if run < k:
                _split_run(text, run, k, out)
            out.append(WordSpan(text[k], k, k + 1))
            run = k + 1
    if run < end:
        _split_run(text, run, end, out)


def word_tokenize(text: str) -> list[WordSpan]:
    words: list[WordSpan] = []
    i, n = 0, len(text)
    while i < n:
        if text[i].isspace():
            i += 1
            continue
        j = i
        while j < n and not text[j].isspace():
            j += 1
        _split_chunk(text, i, j, words)
        i = j
    return words
