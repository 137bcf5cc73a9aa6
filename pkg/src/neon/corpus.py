"""Articles, overlapping sentence chunks and near-duplicate chunk removal."""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from . import kernels
from .dates import DateStamp, format_datestamp, parse_datestamp
from .errors import MalformedMarkup
from .markup import Span, parse_markup, render, strip_markup
from .segment import sentence_spans

DEFAULT_M = 5
DEFAULT_STRIDE = 3
DEFAULT_THRESHOLD = 0.8


@dataclass(frozen=True)
class EntityMention:
    entity_id: str
    surface: str
    sentence_index: int
    start: int = 0  # offsets within the sentence's plain text
    end: int = 0


@dataclass(frozen=True)
class Provenance:
    article_id: str
    source: str
    date: DateStamp

    def to_json(self) -> dict:
        return {"article_id": self.article_id, "source": self.source, "date": format_datestamp(self.date)}

    @classmethod
    def from_json(cls, obj: dict) -> "Provenance":
        return cls(obj["article_id"], obj["source"], parse_datestamp(obj["date"]))


@dataclass(frozen=True)
class Article:
    id: str
    source: str
    date: DateStamp
    body: str
    mentions: tuple[EntityMention, ...]
    sentences: tuple[str, ...]  # each sentence with its entity markup kept
    url: str = ""

    @property
    def entity_ids(self) -> frozenset[str]:
        return frozenset(m.entity_id for m in self.mentions)


@dataclass(frozen=True)
class Chunk:
    id: str
    sentences: tuple[str, ...]
    entities: frozenset[str]
    date: DateStamp
    provenance: tuple[Provenance, ...]
    offset: int = 0

    @property
    def article_id(self) -> str:
        return self.provenance[0].article_id

    @property
    def text(self) -> str:
        """Plain text with markup removed."""
        return " ".join(strip_markup(s) for s in self.sentences)

    def sort_key(self) -> tuple:
        return (self.date, self.article_id, self.offset, self.id)

    def mentions(self) -> list[EntityMention]:
        found = []
        for i, sent in enumerate(self.sentences):
            _, spans = parse_markup(sent)
            found.extend(EntityMention(s.entity_id, s.surface, i, s.start, s.end) for s in spans)
        return found

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "sentences": list(self.sentences),
            "entities": sorted(self.entities),
            "date": format_datestamp(self.date),
            "provenance": [p.to_json() for p in self.provenance],
            "offset": self.offset,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Chunk":
        return cls(
            id=obj["id"],
            sentences=tuple(obj["sentences"]),
            entities=frozenset(obj["entities"]),
            date=parse_datestamp(obj["date"]),
            provenance=tuple(Provenance.from_json(p) for p in obj["provenance"]),
            offset=int(obj.get("offset", 0)),
        )


def parse_article(raw: dict) -> Article:
    """Build an Article from one input record, segmenting and locating mentions.

    Raises:
        MalformedMarkup: unclosed, nested or id-less entity tags.
        BadDate: ``date`` is not a valid YYYYMMDD day.
        KeyError: a required field is missing.
    """
    for key in ("id", "source", "date", "body"):
        if key not in raw:
            raise KeyError(f"article record missing {key!r}")
    date = parse_datestamp(raw["date"])
    plain, spans = parse_markup(raw["body"])
    bounds = sentence_spans(plain, [(s.start, s.end) for s in spans])

    mentions: list[EntityMention] = []
    sentences: list[str] = []
    for idx, (a, b) in enumerate(bounds):
        local = [Span(s.entity_id, s.start - a, s.end - a, s.surface) for s in spans if a <= s.start and s.end <= b]
        mentions.extend(EntityMention(s.entity_id, s.surface, idx, s.start, s.end) for s in local)
        sentences.append(render(plain[a:b], local))
    placed = len(mentions)
    if placed != len(spans):
        # a mention made of pure whitespace, or straddling trimmed edges
        raise MalformedMarkup(f"article {raw['id']}: {len(spans) - placed} mention(s) outside any sentence")
    return Article(
        id=str(raw["id"]),
        source=str(raw["source"]),
        date=date,
        body=raw["body"],
        mentions=tuple(mentions),
        sentences=tuple(sentences),
        url=str(raw.get("url", "")),
    )


def chunk_article(article: Article, m: int = DEFAULT_M, stride: int = DEFAULT_STRIDE) -> list[Chunk]:
    """Slide an ``m``-sentence window over the article with step ``stride``.

    The window stops once it has covered the last sentence, so the final
    chunk may hold fewer than ``m`` sentences.
    """
    if m < 1 or not 1 <= stride <= m:
        raise ValueError(f"need m >= 1 and 1 <= stride <= m, got m={m} stride={stride}")
    n = len(article.sentences)
    by_sentence: dict[int, set[str]] = {}
    for mention in article.mentions:
        by_sentence.setdefault(mention.sentence_index, set()).add(mention.entity_id)
    prov = (Provenance(article.id, article.source, article.date),)
    chunks = []
    offset = 0
    while offset < n:
        stop = min(offset + m, n)
        ents: set[str] = set()
        for i in range(offset, stop):
            ents |= by_sentence.get(i, set())
        chunks.append(
            Chunk(
                id=f"{article.id}#{offset}",
                sentences=article.sentences[offset:stop],
                entities=frozenset(ents),
                date=article.date,
                provenance=prov,
                offset=offset,
            )
        )
        if stop == n:
            break
        offset += stride
    return chunks


_PUNCT = re.compile(r"[^\w\s]")


def tokens(text: str) -> list[str]:
    return _PUNCT.sub("", strip_markup(text).lower()).split()


def trigrams(text: str) -> set[tuple[str, str, str]]:
    toks = tokens(text)
    return set(zip(toks, toks[1:], toks[2:]))


def trigram_jaccard(a: str, b: str) -> float:
    """Jaccard similarity of word-trigram sets; 1.0 when both sets are empty."""
    ta, tb = trigrams(a), trigrams(b)
    if not ta and not tb:
        return 1.0
    if not ta or not tb:
        return 0.0
    inter = len(ta & tb)
    return inter / (len(ta) + len(tb) - inter)


def _trigram_csr(texts: list[str]) -> tuple[np.ndarray, np.ndarray]:
    vocab: dict[tuple[str, str, str], int] = {}
    indptr = [0]
    rows = []
    for text in texts:
        ids = sorted({vocab.setdefault(t, len(vocab)) for t in trigrams(text)})
        rows.append(ids)
        indptr.append(indptr[-1] + len(ids))
    flat = [i for row in rows for i in row]
    return np.asarray(indptr, dtype=np.int64), np.asarray(flat, dtype=np.int64)


def dedup_chunks(
    chunks: Iterable[Chunk],
    threshold: float = DEFAULT_THRESHOLD,
    window_days: int | None = None,
) -> list[Chunk]:
    """Greedy near-duplicate removal in ascending (date, article) order.

    A chunk scoring ``>= threshold`` against an already retained chunk is
    dropped and its provenance appended to the first such retained chunk,
    which keeps its own (earlier) date. ``window_days`` limits comparisons to
    chunks at most that many days apart; ``None`` compares globally.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must lie in [0, 1], got {threshold}")
    ordered = sorted(chunks, key=Chunk.sort_key)
    if not ordered:
        return []
    indptr, indices = _trigram_csr([c.text for c in ordered])
    days = np.asarray([c.date.toordinal() for c in ordered], dtype=np.int64)
    window = -1 if window_days is None else int(window_days)
    assign = kernels.greedy_dedup(indptr, indices, days, float(threshold), window)

    extra: dict[int, list[Provenance]] = {}
    for i, target in enumerate(assign.tolist()):
        if target >= 0:
            extra.setdefault(target, []).extend(ordered[i].provenance)
    out = []
    for i, chunk in enumerate(ordered):
        if assign[i] >= 0:
            continue
        if i in extra:
            chunk = replace(chunk, provenance=chunk.provenance + tuple(extra[i]))
        out.append(chunk)
    return out


def display_names(chunks: Iterable[Chunk]) -> dict[str, str]:
    """Most frequent surface form per entity id (ties: lexicographically first)."""
    counts: dict[str, Counter] = {}
    for chunk in chunks:
        for mention in chunk.mentions():
            counts.setdefault(mention.entity_id, Counter())[mention.surface] += 1
    return {eid: min(c.items(), key=lambda kv: (-kv[1], kv[0]))[0] for eid, c in counts.items()}


def read_jsonl(path: str | Path) -> Iterator[dict]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc


def write_jsonl(path: str | Path, records: Iterable[dict]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True))
            fh.write("\n")
            n += 1
    return n


def read_articles(path: str | Path) -> Iterator[Article]:
    for raw in read_jsonl(path):
        yield parse_article(raw)


def read_chunks(path: str | Path) -> list[Chunk]:
    return [Chunk.from_json(obj) for obj in read_jsonl(path)]


def write_chunks(path: str | Path, chunks: Iterable[Chunk]) -> int:
    return write_jsonl(path, (c.to_json() for c in chunks))


@dataclass
class IngestStats:
    articles: int = 0
    chunks: int = 0
    retained: int = 0
    sentences: int = 0


def ingest(
    records: Iterable[dict],
    m: int = DEFAULT_M,
    stride: int = DEFAULT_STRIDE,
    threshold: float = DEFAULT_THRESHOLD,
    window_days: int | None = None,
) -> tuple[list[Chunk], IngestStats]:
    """Parse, chunk and deduplicate a stream of raw article records."""
    stats = IngestStats()
    chunks: list[Chunk] = []
    for raw in records:
        article = parse_article(raw)
        stats.articles += 1
        stats.sentences += len(article.sentences)
        chunks.extend(chunk_article(article, m, stride))
    stats.chunks = len(chunks)
    kept = dedup_chunks(chunks, threshold, window_days)
    stats.retained = len(kept)
    return kept, stats
