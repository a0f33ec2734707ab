"""Tokenization for lexicon matching and embedding lookup.

Two paths: Unicode word boundaries with lowercasing for languages written
with spaces (English, Italian, ...), and greedy forward maximum matching
against a caller-supplied vocabulary for Chinese, falling back to single
characters so the token stream always reproduces the input modulo
whitespace. Callers wanting a statistical segmenter can pass pre-tokenized
input downstream instead (dataset JSONL field ``tokens``).
"""

from __future__ import annotations

import re
from dataclasses import dataclass

_WORD_RE = re.compile(r"\w+", re.UNICODE)


@dataclass(frozen=True)
class TokenSequence:
    """Tokens plus per-token (start, end) byte offsets into the UTF-8 source."""

    tokens: tuple[str, ...]
    spans: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if len(self.tokens) != len(self.spans):
            raise ValueError("tokens and spans must align")
        prev_end = -1
        for start, end in self.spans:
            if start < 0 or end <= start:
                raise ValueError(f"invalid span ({start}, {end})")
            if start < prev_end:
                raise ValueError("spans must be non-overlapping and increasing")
            prev_end = end

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)


def _byte_offsets(text: str) -> list[int]:
    """Byte offset of each character boundary; offsets[i] = bytes before char i."""
    offsets = [0]
    for ch in text:
        offsets.append(offsets[-1] + len(ch.encode("utf-8")))
    return offsets


def _tokenize_words(text: str) -> TokenSequence:
    offsets = _byte_offsets(text)
    tokens = []
    spans = []
    for match in _WORD_RE.finditer(text):
        tokens.append(match.group().lower())
        spans.append((offsets[match.start()], offsets[match.end()]))
    return TokenSequence(tuple(tokens), tuple(spans))


def _tokenize_maxmatch(text: str, vocabulary: frozenset[str] | set[str]) -> TokenSequence:
    offsets = _byte_offsets(text)
    max_len = max((len(term) for term in vocabulary), default=1)
    tokens: list[str] = []
    spans: list[tuple[int, int]] = []
    i = 0
    n = len(text)
    while i < n:
        if text[i].isspace():
            i += 1
            continue
        end = min(i + max_len, n)
        match_len = 1
        for length in range(end - i, 1, -1):
            if text[i : i + length] in vocabulary:
                match_len = length
                break
        tokens.append(text[i : i + match_len])
        spans.append((offsets[i], offsets[i + match_len]))
        i += match_len
    return TokenSequence(tuple(tokens), tuple(spans))


def tokenize(
    text: str,
    language: str = "en",
    vocabulary: frozenset[str] | set[str] | None = None,
) -> TokenSequence:
    """Tokenize ``text`` for the given BCP-47 language tag.

    Chinese (``zh*``) requires a vocabulary (lexicon terms plus any base
    wordlist) for longest-match segmentation. Empty text yields an empty
    sequence.
    """
    if not text:
        return TokenSequence((), ())
    if language.lower().startswith("zh"):
        if not vocabulary:
            raise ValueError("Chinese tokenization requires a vocabulary")
        return _tokenize_maxmatch(text, vocabulary)
    return _tokenize_words(text)
