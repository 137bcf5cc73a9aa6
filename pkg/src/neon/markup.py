"""Inline entity markup: ``<e id="Q42">Douglas Adams</e>``."""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import MalformedMarkup

_TAG = re.compile(r"<\s*(/?)\s*e\b([^>]*)>")
_OPEN_ATTRS = re.compile(r'^\s+id\s*=\s*"([^"]*)"\s*$')


@dataclass(frozen=True)
class Span:
    entity_id: str
    start: int
    end: int
    surface: str


def parse_markup(text: str) -> tuple[str, list[Span]]:
    """Strip entity tags, returning plain text and mention spans over it."""
    plain: list[str] = []
    spans: list[Span] = []
    pos = 0
    length = 0
    open_id: str | None = None
    open_at = 0
    for m in _TAG.finditer(text):
        chunk = text[pos:m.start()]
        plain.append(chunk)
        length += len(chunk)
        pos = m.end()
        closing, attrs = m.group(1), m.group(2)
        if closing:
            if attrs.strip():
                raise MalformedMarkup(f"closing tag with attributes at {m.start()}")
            if open_id is None:
                raise MalformedMarkup(f"stray </e> at offset {m.start()}")
            surface = "".join(plain)[open_at:length]
            spans.append(Span(open_id, open_at, length, surface))
            open_id = None
            continue
        if open_id is not None:
            raise MalformedMarkup(f"nested <e> at offset {m.start()}")
        am = _OPEN_ATTRS.match(attrs)
        if am is None or not am.group(1).strip():
            raise MalformedMarkup(f"<e> without a non-empty id at offset {m.start()}")
        open_id = am.group(1).strip()
        open_at = length
    if open_id is not None:
        raise MalformedMarkup(f"unclosed <e id=\"{open_id}\">")
    plain.append(text[pos:])
    return "".join(plain), spans


def strip_markup(text: str) -> str:
    return _TAG.sub("", text)


def render(plain: str, spans: list[Span], *, with_ids: bool = True) -> str:
    """Reinsert tags around ``spans`` (sorted, non-overlapping) in ``plain``."""
    out: list[str] = []
    pos = 0
    for s in sorted(spans, key=lambda s: s.start):
        out.append(plain[pos:s.start])
        out.append(f'<e id="{s.entity_id}">' if with_ids else "<e>")
        out.append(plain[s.start:s.end])
        out.append("</e>")
        pos = s.end
    out.append(plain[pos:])
    return "".join(out)
