"""Deterministic offline LLM stand-ins.

``ScriptedLlm`` returns canned responses keyed by prompt hash (or computed by
a callable). ``RuleBasedLlm`` reads the prompts built by this package and
answers them mechanically: extraction prompts get the sentences that mention
the target entities, RAG prompts get their passages stitched together, and
judge prompts get a rating from simple surface checks.
"""

from __future__ import annotations

import datetime as dt
import json
import re
import threading
from typing import Callable, Mapping

from .dates import MONTHS, format_datestamp
from .errors import ProviderFailure
from .evaluation import ATTRIBUTES, HELPFULNESS, RELEVANCE
from .prompts import M1_HEADER, M2_HEADER, RAG_EMPTY_HEADER, RAG_HEADER
from .providers import prompt_hash


class ScriptedLlm:
    """Canned responses; unknown prompts get ``default`` or raise ProviderFailure."""

    def __init__(self, script: Mapping[str, str] | Callable[[str], str], default: str | None = None):
        self.script = script
        self.default = default
        self.calls: list[str] = []
        self._lock = threading.Lock()
        self.model_info = "scripted-mock"

    def complete(self, prompt: str, **params) -> str:
        with self._lock:
            self.calls.append(prompt)
        if callable(self.script):
            return self.script(prompt)
        key = prompt_hash(prompt)
        if key in self.script:
            return self.script[key]
        if prompt in self.script:
            return self.script[prompt]
        if self.default is not None:
            return self.default
        raise ProviderFailure(f"no scripted response for prompt {key[:12]}")


_TAGGED = re.compile(r"<e>(.*?)</e>")
_SENT = re.compile(r"(?<=[.!?])\s+(?=[\"'(‘“]?[A-Z0-9<])")
_WORD = re.compile(r"\w+")
_PASSAGE = re.compile(r"^\[(\d+)\] \((\d{8})\) (.*)$")


def _field(prompt: str, label: str) -> str:
    m = re.search(rf"^{re.escape(label)}: (.*)$", prompt, re.M)
    return m.group(1).strip() if m else ""


def _section(prompt: str, title: str) -> str:
    m = re.search(rf"^## {re.escape(title)}\n(.*?)(?=^## |\Z)", prompt, re.S | re.M)
    return m.group(1).strip() if m else ""


def _mentions(sentence: str, name: str) -> bool:
    """Whether a tagged span in ``sentence`` shares a word with ``name``."""
    wanted = set(_WORD.findall(name.lower()))
    return any(wanted & set(_WORD.findall(span.lower())) for span in _TAGGED.findall(sentence))


def _plain(text: str) -> str:
    return text.replace("<e>", "").replace("</e>", "")


class RuleBasedLlm:
    """Mechanical answers to this package's own prompt formats."""

    model_info = "rule-based-mock"

    def complete(self, prompt: str, **params) -> str:
        if prompt.startswith(M1_HEADER):
            return self._m1(prompt)
        if prompt.startswith(M2_HEADER):
            return self._m2(prompt)
        if prompt.startswith(RAG_EMPTY_HEADER):
            return self._abstain(prompt)
        if prompt.startswith(RAG_HEADER):
            return self._rag(prompt)
        if prompt.startswith("## Task Description"):
            return self._judge(prompt)
        raise ProviderFailure("rule-based mock does not recognise this prompt")

    def _m1(self, prompt: str) -> str:
        subject = _field(prompt, "Subject entity")
        date = _field(prompt, "Publication date")
        lines = []
        for sent in _SENT.split(_section(prompt, "News excerpt")):
            spans = _TAGGED.findall(sent)
            if _mentions(sent, subject) and any(not _mentions(f"<e>{s}</e>", subject) for s in spans):
                lines.append(f"({date}, {_plain(sent)})")
        return "\n".join(lines) or "NONE"

    def _m2(self, prompt: str) -> str:
        subject = _field(prompt, "Subject entity")
        obj = _field(prompt, "Object entity")
        lines = []
        for row in _section(prompt, "News excerpts").splitlines():
            m = _PASSAGE.match(row)
            if not m:
                continue
            for sent in _SENT.split(m.group(3)):
                if _mentions(sent, subject) and _mentions(sent, obj):
                    line = f"({m.group(2)}, {_plain(sent)})"
                    if line not in lines:
                        lines.append(line)
        return "\n".join(lines) or "NONE"

    @staticmethod
    def _query_date(prompt: str) -> str:
        m = re.search(r"\(Date: ([A-Z][a-z]+ \d{1,2}, \d{4})\)", prompt)
        return m.group(1) if m else "the requested date"

    def _abstain(self, prompt: str) -> str:
        return f"Up-to-date information about this query is not available for {self._query_date(prompt)}."

    def _rag(self, prompt: str) -> str:
        facts = []
        for row in _section(prompt, "Supporting passages").splitlines():
            m = _PASSAGE.match(row)
            if m:
                text = m.group(3).rstrip()
                facts.append(text if text.endswith((".", "!", "?")) else text + ".")
        return f"As of {self._query_date(prompt)}, the news reports the following. " + " ".join(facts)

    def _judge(self, prompt: str) -> str:
        attr = next(a for a in ATTRIBUTES if f"## {a} Criterion" in prompt)
        section = prompt[prompt.rindex("## Input to be rated"):]
        question = _field(section, "User query")
        response = _field(section, "AI assistant’s response")
        if "not available" in response:
            rating, reason = 0, "The response provides no information for the query."
        elif attr == HELPFULNESS:
            rating = 2 if len(response) >= 160 else 1
            reason = "Detailed response naming further entities." if rating == 2 else "Short response."
        elif attr == RELEVANCE:
            m = re.search(r"\(Date: ([A-Z][a-z]+) (\d{1,2}), (\d{4})\)", question)
            on_date = False
            if m:
                day = dt.date(int(m.group(3)), MONTHS.index(m.group(1)) + 1, int(m.group(2)))
                on_date = f"{m.group(1)} {m.group(2)}, {m.group(3)}" in response or format_datestamp(day) in response
            rating = 2 if on_date else 1
            reason = "The response addresses the query date." if on_date else "The query date is not addressed."
        else:
            passages = set(_WORD.findall(_field(section, "Supporting passages").lower()))
            words = _WORD.findall(response.lower())
            share = sum(w in passages for w in words) / len(words) if words else 0.0
            rating = 2 if share >= 0.75 else 1 if share >= 0.4 else 0
            reason = f"{share:.0%} of the response words are found in the passages."
        return json.dumps({"rating": rating, "reason": reason})

