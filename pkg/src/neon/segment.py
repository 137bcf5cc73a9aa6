"""Rule-based sentence splitter.

A boundary is terminal punctuation (plus optional closing quotes/brackets)
followed by whitespace and then an uppercase letter or digit, possibly behind
an opening quote. Boundaries are suppressed after known abbreviations, after
single-letter initials, and inside protected spans such as entity mentions.
"""

from __future__ import annotations

import re
from functools import lru_cache
from importlib import resources

_BOUNDARY = re.compile(r"([.!?]+)([\"')\]’”]*)(\s+)(?=[\"'(\[‘“]?[A-Z0-9])")
_LAST_TOKEN = re.compile(r"(\S+)$")


@lru_cache(maxsize=1)
def abbreviations() -> frozenset[str]:
    text = resources.files("neon").joinpath("data/abbreviations.txt").read_text("utf-8")
    return frozenset(
        line.strip().lower() for line in text.splitlines() if line.strip() and not line.startswith("#")
    )


def _protected_abbrev(text: str, punct_start: int, punct: str) -> bool:
    if punct != ".":
        return False
    m = _LAST_TOKEN.search(text, 0, punct_start)
    if m is None:
        return False
    token = m.group(1).lstrip("\"'(‘“[")
    if len(token) == 1 and token.isalpha() and token.isupper():
        return True
    return token.lower() in abbreviations()


def sentence_spans(text: str, protected: list[tuple[int, int]] = ()) -> list[tuple[int, int]]:
    """Return (start, end) offsets of sentences in ``text``, whitespace-trimmed."""
    cuts = [0]
    for m in _BOUNDARY.finditer(text):
        end = m.end(2)
        if any(a < end < b for a, b in protected):
            continue
        if _protected_abbrev(text, m.start(1), m.group(1)):
            continue
        cuts.append(m.end())
    cuts.append(len(text))
    spans = []
    for a, b in zip(cuts, cuts[1:]):
        while a < b and text[a].isspace():
            a += 1
        while b > a and text[b - 1].isspace():
            b -= 1
        if a < b:
            spans.append((a, b))
    return spans


def split_sentences(text: str) -> list[str]:
    return [text[a:b] for a, b in sentence_spans(text)]
