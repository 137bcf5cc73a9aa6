"""Temporal question answering over a datastore.

A telegraphic query is rewritten to carry its date in words and canonical
entity names, the best-matching entries are retrieved, and a grounded
answer is requested from the LLM.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Protocol, Sequence

from .datastore import Datastore, ScoredEntry, retrieve_generic, retrieve_hybrid, retrieve_temporal
from .dates import DateStamp, format_datestamp, natural_date
from .prompts import RAG_EMPTY_HEADER, RAG_EMPTY_TEMPLATE, RAG_HEADER, RAG_TEMPLATE
from .providers import Embedder, LlmClient, model_info

STRATEGIES = ("temporal", "generic", "hybrid")
DEFAULT_K_INTERACTIONS = 10
DEFAULT_K_CHUNKS = 5

_DATE_PREFIX = re.compile(r"^\(Date: [A-Z][a-z]+ \d{1,2}, \d{4}\)\s*")


@dataclass(frozen=True)
class LinkedSpan:
    start: int
    end: int
    entity_id: str
    name: str


class Linker(Protocol):
    def link(self, text: str) -> list[LinkedSpan]: ...


class DictionaryLinker:
    """Longest-match, case-insensitive surface-form lookup on word boundaries.

    ``mapping`` sends a surface form to a canonical name, or to an
    ``(entity_id, name)`` pair. Canonical names always link to themselves so
    that relinking already-canonical text is a no-op.
    """

    def __init__(self, mapping: Mapping[str, str | Sequence[str]] | None = None):
        self.table: dict[str, tuple[str, str]] = {}
        for surface, target in (mapping or {}).items():
            eid, name = (target, target) if isinstance(target, str) else (target[0], target[1])
            self.table.setdefault(name.lower(), (eid, name))
            self.table[surface.lower()] = (eid, name)
        self._pattern = None
        if self.table:
            alts = sorted(self.table, key=lambda s: (-len(s), s))
            self._pattern = re.compile(
                r"(?<!\w)(" + "|".join(re.escape(a) for a in alts) + r")(?!\w)", re.IGNORECASE
            )

    def link(self, text: str) -> list[LinkedSpan]:
        if self._pattern is None:
            return []
        spans = []
        for m in self._pattern.finditer(text):
            eid, name = self.table[m.group(1).lower()]
            spans.append(LinkedSpan(m.start(), m.end(), eid, name))
        return spans


@dataclass(frozen=True)
class TemporalQuery:
    raw: str
    date: DateStamp
    reformulated: str
    linked_entities: tuple[str, ...] = ()


def reformulate(q: str, t_q: DateStamp, linker: Linker | Mapping[str, str] | None = None) -> TemporalQuery:
    """Prefix ``(Date: Month D, YYYY)`` and canonicalise linked entity mentions."""
    if linker is None or isinstance(linker, Mapping):
        linker = DictionaryLinker(linker)
    body = _DATE_PREFIX.sub("", q.strip())
    out, pos, linked = [], 0, []
    for span in linker.link(body):
        out.append(body[pos:span.start])
        out.append(span.name)
        pos = span.end
        if span.entity_id not in linked:
            linked.append(span.entity_id)
    out.append(body[pos:])
    return TemporalQuery(q, t_q, f"(Date: {natural_date(t_q)}) {''.join(out)}".rstrip(), tuple(linked))


@dataclass
class QaResponse:
    text: str
    support: list[ScoredEntry]
    query: TemporalQuery
    model_info: str
    strategy: str = "temporal"
    prompt: str = ""

    def to_json(self, method: str = "", item_id: str | None = None) -> dict:
        rec = {
            "query": self.query.raw,
            "reformulated": self.query.reformulated,
            "date": format_datestamp(self.query.date),
            "strategy": self.strategy,
            "method": method,
            "answer": self.text,
            "support": [s.to_json() for s in self.support],
            "model": self.model_info,
        }
        if item_id is not None:
            rec["id"] = item_id
        return rec


def render_rag_prompt(tq: TemporalQuery, support: Sequence[ScoredEntry]) -> str:
    if not support:
        return RAG_EMPTY_TEMPLATE.format(header=RAG_EMPTY_HEADER, query=tq.reformulated)
    passages = "\n".join(
        f"[{i}] ({format_datestamp(s.entry.date)}) {s.entry.text}" for i, s in enumerate(support, 1)
    )
    return RAG_TEMPLATE.format(header=RAG_HEADER, query=tq.reformulated, passages=passages)


def retrieve(tq: TemporalQuery, store: Datastore, strategy: str, k: int, r: int,
             embedder: Embedder) -> list[ScoredEntry]:
    if strategy == "temporal":
        return retrieve_temporal(store, tq.reformulated, tq.date, k, r, embedder=embedder)
    if strategy == "generic":
        return retrieve_generic(store, tq.reformulated, k, embedder=embedder)
    if strategy == "hybrid":
        return retrieve_hybrid(store, tq.reformulated, tq.date, k, r, embedder=embedder)
    raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")


def answer(
    tq: TemporalQuery,
    store: Datastore,
    strategy: str,
    k: int,
    r: int,
    llm: LlmClient,
    embedder: Embedder,
    *,
    temperature: float = 0.0,
    max_tokens: int = 1024,
) -> QaResponse:
    """Retrieve support for ``tq`` and generate an answer grounded in it.

    With no support the abstention prompt is sent instead. Provider errors
    propagate to the caller.
    """
    support = retrieve(tq, store, strategy, k, r, embedder)
    prompt = render_rag_prompt(tq, support)
    text = llm.complete(prompt, temperature=temperature, max_tokens=max_tokens)
    return QaResponse(text, support, tq, model_info(llm), strategy, prompt)
