"""Word-level tokenization and gazetteer mention finding.

Mentions are located by greedy left-to-right longest match of token windows
against the store's surface index, standing in for a statistical NER model.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .kg import KgStore, normalize

#: a token is a maximal run of word characters or a single punctuation character
_TOKEN = re.compile(r"\w+|[^\w\s]")

DEFAULT_MAX_SPAN = 6


@dataclass(frozen=True)
class TokenSequence:
    tokens: tuple[str, ...]
    source_text: str


@dataclass(frozen=True)
class MentionSpan:
    """Half-open token span [start, end) matched to one or more entities."""

    start: int
    end: int
    surface: str
    candidate_ids: tuple[str, ...]

    def __post_init__(self) -> None:
        if not 0 <= self.start < self.end:
            raise ValueError(f"invalid span [{self.start}, {self.end})")
        if not self.candidate_ids:
            raise ValueError(f"mention {self.surface!r} has no candidates")


def tokenize(text: str) -> TokenSequence:
    """Split text into word tokens; each punctuation character stands alone."""
    return TokenSequence(tokens=tuple(_TOKEN.findall(text)), source_text=text)


def find_mentions(
    tokens: TokenSequence, store: KgStore, max_span: int = DEFAULT_MAX_SPAN
) -> list[MentionSpan]:
    """Greedy longest-match gazetteer scan.

    At each position the longest window (up to ``max_span`` tokens) whose
    normalized join hits the surface index becomes a mention; scanning
    resumes after its end, so mentions never overlap.
    """
    if max_span < 1:
        raise ValueError(f"max_span must be >= 1, got {max_span}")
    words = tokens.tokens
    mentions = []
    i = 0
    while i < len(words):
        matched = None
        for width in range(min(max_span, len(words) - i), 0, -1):
            surface = " ".join(words[i : i + width])
            key = normalize(surface)
            if not key:
                continue
            ids = store.surface_index.get(key)
            if ids:
                matched = MentionSpan(i, i + width, surface, tuple(ids))
                break
        if matched is None:
            i += 1
        else:
            mentions.append(matched)
            i = matched.end
    return mentions
