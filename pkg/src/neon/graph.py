"""Entity-interaction graph construction.

Two extraction variants share the parsing and assembly code:

* M1 prompts once per (subject, chunk) pair and lets the model pick the
  objects among the marked entities.
* M2 mines (subject, object) pairs by TF-IDF co-occurrence, groups their
  shared chunks into date-sorted batches of ``k`` and prompts once per batch.
"""

from __future__ import annotations

import json
import logging
import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import Chunk, display_names, read_jsonl, write_jsonl
from .dates import DateStamp, format_datestamp, parse_datestamp
from .errors import BadDate, EmptyCorpus, PairNotInChunk, SubjectNotInChunk
from .markup import parse_markup, render, strip_markup
from .prompts import M1_HEADER, M1_TEMPLATE, M2_HEADER, M2_TEMPLATE
from .providers import LlmClient

log = logging.getLogger(__name__)

M1 = "M1"
M2 = "M2"
DEFAULT_TOP_P = 20
DEFAULT_K = 4


@dataclass(frozen=True)
class Interaction:
    date: DateStamp
    subject: str
    object: str | None
    text: str
    variant: str
    provenance: tuple[tuple[str, str], ...] = ()

    def to_json(self) -> dict:
        return {
            "date": format_datestamp(self.date),
            "subject": self.subject,
            "object": self.object,
            "text": self.text,
            "variant": self.variant,
            "provenance": [{"article_id": a, "source": s} for a, s in self.provenance],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Interaction":
        return cls(
            date=parse_datestamp(obj["date"]),
            subject=obj["subject"],
            object=obj.get("object"),
            text=obj["text"],
            variant=obj["variant"],
            provenance=tuple((p["article_id"], p["source"]) for p in obj.get("provenance", [])),
        )


@dataclass
class NeonGraph:
    interactions: list[Interaction]
    subjects: frozenset[str]

    @property
    def timeframe(self) -> tuple[DateStamp, DateStamp] | None:
        if not self.interactions:
            return None
        dates = [i.date for i in self.interactions]
        return min(dates), max(dates)

    def __len__(self) -> int:
        return len(self.interactions)


@dataclass(frozen=True)
class EntityPair:
    subject: str
    object: str
    score: float


@dataclass
class ExtractionMetrics:
    prompts: int = 0
    parsed: int = 0
    rejected: int = 0
    failures: list[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "prompts": self.prompts,
            "parsed_tuples": self.parsed,
            "rejects": self.rejected,
            "provider_failures": len(self.failures),
            "failures": self.failures,
        }


def select_target_pairs(chunks: Sequence[Chunk], subjects: Iterable[str], top_p: int = DEFAULT_TOP_P) -> list[EntityPair]:
    """Rank co-occurring objects per subject by ``tf * ln(N / (1 + df))``.

    ``tf`` counts chunks holding both entities, ``df`` the chunks holding the
    object, ``N`` all chunks. Scores can be negative for very common objects;
    they are still ranked. Ties go to the lexicographically smaller object.
    """
    if top_p < 1:
        raise ValueError("top_p must be positive")
    n = len(chunks)
    if n == 0:
        raise EmptyCorpus("no chunks to mine pairs from")
    df: dict[str, int] = {}
    for c in chunks:
        for e in c.entities:
            df[e] = df.get(e, 0) + 1
    pairs: list[EntityPair] = []
    for s in sorted(set(subjects)):
        tf: dict[str, int] = {}
        for c in chunks:
            if s in c.entities:
                for o in c.entities:
                    if o != s:
                        tf[o] = tf.get(o, 0) + 1
        scored = [(tf[o] * math.log(n / (1 + df[o])), o) for o in tf]
        scored.sort(key=lambda so: (-so[0], so[1]))
        pairs.extend(EntityPair(s, o, score) for score, o in scored[:top_p])
    return pairs


def batch_chunks(chunks: Iterable[Chunk], k: int = DEFAULT_K) -> list[list[Chunk]]:
    """Sort chunks by date (then article) and cut into consecutive groups of ``k``."""
    if k < 1:
        raise ValueError("k must be positive")
    ordered = sorted(chunks, key=Chunk.sort_key)
    return [ordered[i:i + k] for i in range(0, len(ordered), k)]


def _marked_text(chunk: Chunk) -> str:
    """Chunk text with every mention wrapped in bare ``<e>...</e>`` tags."""
    out = []
    for sent in chunk.sentences:
        plain, spans = parse_markup(sent)
        out.append(render(plain, spans, with_ids=False))
    return " ".join(out)


def build_prompt_m1(subject: str, chunk: Chunk, name: str | None = None) -> str:
    if subject not in chunk.entities:
        raise SubjectNotInChunk(f"{subject} not in chunk {chunk.id}")
    name = name or _surface_of(subject, chunk)
    return M1_TEMPLATE.format(
        header=M1_HEADER, subject=name, date=format_datestamp(chunk.date), text=_marked_text(chunk)
    )


def build_prompt_m2(subject: str, object: str, batch: Sequence[Chunk],
                    names: dict[str, str] | None = None) -> str:
    if not batch:
        raise PairNotInChunk("empty batch")
    for c in batch:
        if subject not in c.entities or object not in c.entities:
            raise PairNotInChunk(f"({subject}, {object}) not both in chunk {c.id}")
    names = names or {}
    passages = "\n".join(
        f"[{i}] ({format_datestamp(c.date)}) {_marked_text(c)}" for i, c in enumerate(batch, 1)
    )
    return M2_TEMPLATE.format(
        header=M2_HEADER,
        subject=names.get(subject) or _surface_of(subject, batch[0]),
        object=names.get(object) or _surface_of(object, batch[0]),
        passages=passages,
    )


def _surface_of(entity: str, chunk: Chunk) -> str:
    for m in chunk.mentions():
        if m.entity_id == entity:
            return m.surface
    return entity


@dataclass
class ExtractionContext:
    """What the parser needs to know about the prompt an output answers."""

    variant: str
    subject: str
    dates: tuple[DateStamp, ...]
    object: str | None = None
    surfaces: tuple[str, ...] = ()  # subject surface forms; empty disables the check
    others: tuple[tuple[str, str], ...] = ()  # (entity_id, surface) for M1 object guessing
    provenance: dict[DateStamp, tuple[tuple[str, str], ...]] = field(default_factory=dict)


@dataclass
class ParsedOutput:
    interactions: list[Interaction]
    rejected: int = 0


_LIST_MARK = re.compile(r"^\s*(?:[-*•]|\d+[.)])\s+")
_DATED = re.compile(r"^\(\s*(\d{8})\s*,\s*(.*?)\s*\)\s*[.;,]?$")
_TUPLE_LIKE = re.compile(r"^\(\s*([^,()]*)\s*,\s*(.*)\)\s*[.;,]?$")
_EMPTY = {"NONE", "[]", "N/A", "EMPTY LIST", "NO INTERACTIONS"}


def parse_extractions(llm_output: str, ctx: ExtractionContext) -> ParsedOutput:
    """Parse ``(YYYYMMDD, sentence)`` lines into interactions.

    Rejected lines (bad dates, M2 dates outside the batch, sentences that do
    not name the subject, preamble) are counted rather than raised. Undated
    sentences take the chunk date under M1 and expand over every batch date
    under M2.
    """
    out = ParsedOutput([])
    batch_dates = sorted(set(ctx.dates))
    for raw in llm_output.splitlines():
        line = raw.strip()
        if not line or line.strip(".").upper() in _EMPTY:
            continue
        line = _LIST_MARK.sub("", line)
        line = strip_markup(line).replace("**", "").strip()

        dates: list[DateStamp]
        m = _DATED.match(line)
        if m:
            text = m.group(2).strip()
            try:
                stated = parse_datestamp(m.group(1))
            except BadDate:
                out.rejected += 1
                continue
            if ctx.variant == M2:
                if stated not in batch_dates:
                    out.rejected += 1
                    continue
                dates = [stated]
            else:
                dates = [batch_dates[0]]
        else:
            t = _TUPLE_LIKE.match(line)
            if t and any(ch.isdigit() for ch in t.group(1)):
                out.rejected += 1  # a date was attempted but is unusable
                continue
            if line.startswith("(") and line.endswith(")"):
                line = line[1:-1]
            text = line.strip()
            if text.endswith(":"):
                out.rejected += 1
                continue
            dates = batch_dates[:1] if ctx.variant == M1 else batch_dates

        if not text or not dates or not _names_subject(text, ctx.surfaces):
            out.rejected += 1
            continue
        obj = ctx.object if ctx.variant == M2 else _guess_object(text, ctx.others)
        for d in dates:
            out.interactions.append(
                Interaction(d, ctx.subject, obj, text, ctx.variant, ctx.provenance.get(d, ()))
            )
    return out


def _names_subject(text: str, surfaces: tuple[str, ...]) -> bool:
    if not surfaces:
        return True
    low = text.lower()
    return any(s.lower() in low for s in surfaces if s)


def _guess_object(text: str, others: tuple[tuple[str, str], ...]) -> str | None:
    low = text.lower()
    for eid, surface in others:
        if surface and surface.lower() in low:
            return eid
    return None


def _call_all(llm: LlmClient, prompts: list[str], parallelism: int, temperature: float) -> list[str | Exception]:
    def one(prompt: str) -> str | Exception:
        try:
            return llm.complete(prompt, temperature=temperature)
        except Exception as exc:  # recorded per unit; the run continues
            return exc

    if parallelism <= 1 or len(prompts) <= 1:
        return [one(p) for p in prompts]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(one, prompts))


def _chunk_provenance(chunks: Iterable[Chunk]) -> tuple[tuple[str, str], ...]:
    seen: dict[tuple[str, str], None] = {}
    for c in chunks:
        for p in c.provenance:
            seen.setdefault((p.article_id, p.source), None)
    return tuple(seen)


def extract_m1(
    subjects: Iterable[str],
    chunks: Sequence[Chunk],
    llm: LlmClient,
    *,
    names: dict[str, str] | None = None,
    parallelism: int = 1,
    temperature: float = 0.0,
) -> tuple[NeonGraph, ExtractionMetrics]:
    subjects = frozenset(subjects)
    names = names if names is not None else display_names(chunks)
    ordered = sorted(chunks, key=Chunk.sort_key)
    units = [(s, c) for s in sorted(subjects) for c in ordered if s in c.entities]
    prompts = [build_prompt_m1(s, c, names.get(s)) for s, c in units]
    outputs = _call_all(llm, prompts, parallelism, temperature)

    metrics = ExtractionMetrics(prompts=len(prompts))
    interactions: list[Interaction] = []
    for (s, c), result in zip(units, outputs):
        if isinstance(result, Exception):
            log.warning("M1 extraction failed for %s in %s: %s", s, c.id, result)
            metrics.failures.append({"subject": s, "chunk": c.id, "error": f"{type(result).__name__}: {result}"})
            continue
        mentions = c.mentions()
        surfaces = tuple(sorted({m.surface for m in mentions if m.entity_id == s} | {names.get(s, "")} - {""}))
        others = tuple(dict.fromkeys((m.entity_id, m.surface) for m in mentions if m.entity_id != s))
        ctx = ExtractionContext(
            variant=M1, subject=s, dates=(c.date,), surfaces=surfaces, others=others,
            provenance={c.date: _chunk_provenance([c])},
        )
        parsed = parse_extractions(result, ctx)
        metrics.parsed += len(parsed.interactions)
        metrics.rejected += parsed.rejected
        interactions.extend(parsed.interactions)
    return NeonGraph(interactions, subjects), metrics


def extract_m2(
    pairs: Iterable[EntityPair | tuple[str, str]],
    chunks: Sequence[Chunk],
    llm: LlmClient,
    k: int = DEFAULT_K,
    *,
    names: dict[str, str] | None = None,
    parallelism: int = 1,
    temperature: float = 0.0,
) -> tuple[NeonGraph, ExtractionMetrics]:
    pairs = [(p.subject, p.object) if isinstance(p, EntityPair) else tuple(p) for p in pairs]
    names = names if names is not None else display_names(chunks)
    units: list[tuple[str, str, list[Chunk]]] = []
    for s, o in pairs:
        shared = [c for c in chunks if s in c.entities and o in c.entities]
        units.extend((s, o, batch) for batch in batch_chunks(shared, k))
    prompts = [build_prompt_m2(s, o, batch, names) for s, o, batch in units]
    outputs = _call_all(llm, prompts, parallelism, temperature)

    metrics = ExtractionMetrics(prompts=len(prompts))
    interactions: list[Interaction] = []
    for (s, o, batch), result in zip(units, outputs):
        if isinstance(result, Exception):
            log.warning("M2 extraction failed for (%s, %s): %s", s, o, result)
            metrics.failures.append({
                "subject": s, "object": o, "chunks": [c.id for c in batch],
                "error": f"{type(result).__name__}: {result}",
            })
            continue
        surfaces = {m.surface for c in batch for m in c.mentions() if m.entity_id == s}
        if names.get(s):
            surfaces.add(names[s])
        dates = tuple(sorted({c.date for c in batch}))
        ctx = ExtractionContext(
            variant=M2, subject=s, object=o, dates=dates, surfaces=tuple(sorted(surfaces)),
            provenance={d: _chunk_provenance(c for c in batch if c.date == d) for d in dates},
        )
        parsed = parse_extractions(result, ctx)
        metrics.parsed += len(parsed.interactions)
        metrics.rejected += parsed.rejected
        interactions.extend(parsed.interactions)
    return NeonGraph(interactions, frozenset(s for s, _ in pairs)), metrics


def write_graph(path: str | Path, graph: NeonGraph, metrics: ExtractionMetrics | None = None) -> None:
    """Write interactions as JSON lines plus a ``<path>.metrics.json`` sidecar."""
    write_jsonl(path, (i.to_json() for i in graph.interactions))
    sidecar = dict(metrics.to_json() if metrics else {})
    sidecar["subjects"] = sorted(graph.subjects)
    tf = graph.timeframe
    sidecar["timeframe"] = [format_datestamp(d) for d in tf] if tf else None
    Path(f"{path}.metrics.json").write_text(
        json.dumps(sidecar, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8"
    )


def read_graph(path: str | Path) -> NeonGraph:
    interactions = [Interaction.from_json(o) for o in read_jsonl(path)]
    sidecar = Path(f"{path}.metrics.json")
    if sidecar.exists():
        subjects = frozenset(json.loads(sidecar.read_text("utf-8")).get("subjects", []))
    else:
        subjects = frozenset(i.subject for i in interactions)
    return NeonGraph(interactions, subjects)
