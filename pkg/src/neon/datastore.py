"""Timestamped dense datastore with temporal and generic retrieval.

Entries are scored by exact cosine over the full vector table (no ANN).
Vectors are kept as float32; dot products accumulate in float64 in a fixed
left-to-right order so scores are reproducible bit for bit on every backend.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

from . import kernels
from .corpus import Chunk
from .dates import DateStamp, format_datestamp, parse_datestamp
from .errors import DimensionMismatch, VersionMismatch
from .graph import Interaction
from .providers import Embedder

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
EXACT = "exact-date"
BACKOFF = "backoff"
GENERIC = "generic"
DEFAULT_R = 3

Payload = Union[Interaction, Chunk]


@dataclass(frozen=True)
class StoreEntry:
    id: int
    date: DateStamp
    text: str
    payload: Payload


@dataclass(frozen=True)
class ScoredEntry:
    entry: StoreEntry
    score: float
    tier: str

    def to_json(self) -> dict:
        return {
            "id": self.entry.id,
            "date": format_datestamp(self.entry.date),
            "text": self.entry.text,
            "score": self.score,
            "tier": self.tier,
        }


def cosine(a: Sequence[float], b: Sequence[float]) -> float:
    """Cosine similarity; 0.0 when either vector has zero norm."""
    a32 = np.asarray(a, dtype=np.float32).reshape(1, -1)
    b32 = np.asarray(b, dtype=np.float32).ravel()
    if a32.shape[1] != b32.shape[0]:
        raise DimensionMismatch(f"{a32.shape[1]} != {b32.shape[0]}")
    na = kernels.row_norms(a32)
    nb = float(kernels.row_norms(b32.reshape(1, -1))[0])
    return float(kernels.cosine_rows(a32, na, b32, nb, np.zeros(1, dtype=np.int64))[0])


def _payload_text(item: Payload) -> str:
    return item.text


def _payload_json(item: Payload) -> dict:
    kind = "chunk" if isinstance(item, Chunk) else "interaction"
    return {"kind": kind, **item.to_json()}


def _payload_from_json(obj: dict) -> Payload:
    obj = dict(obj)
    kind = obj.pop("kind")
    return Chunk.from_json(obj) if kind == "chunk" else Interaction.from_json(obj)


class Datastore:
    """Immutable after construction; build one with :func:`index` or :func:`load`."""

    def __init__(self, entries: list[StoreEntry], vectors: np.ndarray, dimension: int, label: str = ""):
        vectors = np.ascontiguousarray(vectors, dtype=np.float32).reshape(len(entries), dimension)
        if vectors.shape[0] != len(entries):
            raise ValueError("one vector per entry required")
        vectors.setflags(write=False)
        self.entries = entries
        self.vectors = vectors
        self.dimension = dimension
        self.label = label
        self.embed_failures = 0
        self.norms = kernels.row_norms(vectors) if len(entries) else np.zeros(0)
        self.norms.setflags(write=False)
        self._ordinals = np.asarray([e.date.toordinal() for e in entries], dtype=np.int64)
        self.by_date: dict[DateStamp, list[int]] = {}
        for e in entries:
            self.by_date.setdefault(e.date, []).append(e.id)

    def __len__(self) -> int:
        return len(self.entries)

    def query_vector(self, text: str, embedder: Embedder) -> tuple[np.ndarray, float]:
        if embedder.dimension() != self.dimension:
            raise DimensionMismatch(f"embedder dimension {embedder.dimension()} != store {self.dimension}")
        q = np.asarray(embedder.embed(text), dtype=np.float32)
        if q.shape != (self.dimension,):
            raise DimensionMismatch(f"query vector has shape {q.shape}")
        return q, float(kernels.row_norms(q.reshape(1, -1))[0])

    def score_rows(self, q: np.ndarray, qnorm: float, rows: np.ndarray) -> np.ndarray:
        if rows.size == 0:
            return np.zeros(0)
        return kernels.cosine_rows(self.vectors, self.norms, q, qnorm, rows)

    def _ranked(self, rows: np.ndarray, scores: np.ndarray, k: int, tier: str) -> list[ScoredEntry]:
        if rows.size == 0 or k <= 0:
            return []
        if rows.size > k:
            # keep everything tied with the k-th best so id tie-breaks stay exact
            kth = np.partition(scores, rows.size - k)[rows.size - k]
            keep = scores >= kth
            rows, scores = rows[keep], scores[keep]
        order = np.lexsort((rows, -scores))[:k]
        return [ScoredEntry(self.entries[int(rows[i])], float(scores[i]), tier) for i in order]

    def temporal(self, q: np.ndarray, qnorm: float, t_q: DateStamp, k: int, r: int) -> list[ScoredEntry]:
        exact = np.asarray(self.by_date.get(t_q, []), dtype=np.int64)
        hits = self._ranked(exact, self.score_rows(q, qnorm, exact), k, EXACT)
        if len(hits) < k and r > 0:
            delta = np.abs(self._ordinals - t_q.toordinal())
            near = np.flatnonzero((delta > 0) & (delta <= r)).astype(np.int64)
            hits += self._ranked(near, self.score_rows(q, qnorm, near), k - len(hits), BACKOFF)
        return hits

    def generic(self, q: np.ndarray, qnorm: float, k: int, exclude: Iterable[int] = ()) -> list[ScoredEntry]:
        rows = np.arange(len(self.entries), dtype=np.int64)
        excluded = set(exclude)
        if excluded:
            rows = np.asarray([i for i in rows.tolist() if i not in excluded], dtype=np.int64)
        return self._ranked(rows, self.score_rows(q, qnorm, rows), k, GENERIC)


def index(items: Iterable[Payload], embedder: Embedder, label: str = "") -> Datastore:
    """Embed every item into a new store; items that fail to embed are skipped and logged."""
    dim = embedder.dimension()
    entries: list[StoreEntry] = []
    vectors: list[np.ndarray] = []
    failed = 0
    for item in items:
        text = _payload_text(item)
        try:
            vec = np.asarray(embedder.embed(text), dtype=np.float32)
            if vec.shape != (dim,):
                raise DimensionMismatch(f"embedder returned shape {vec.shape}, expected ({dim},)")
        except Exception as exc:
            failed += 1
            log.warning("skipping entry that failed to embed: %s", exc)
            continue
        entries.append(StoreEntry(len(entries), item.date, text, item))
        vectors.append(vec)
    store = Datastore(entries, np.vstack(vectors) if vectors else np.zeros((0, dim), np.float32), dim, label)
    store.embed_failures = failed
    return store


def _check_k(k: int) -> None:
    if k < 1:
        raise ValueError("k must be >= 1")


def retrieve_temporal(store: Datastore, query_text: str, t_q: DateStamp, k: int,
                      r: int = DEFAULT_R, *, embedder: Embedder) -> list[ScoredEntry]:
    """Exact-date matches by similarity, then entries within ``r`` days to fill ``k``.

    Exact-date entries always come first, whatever their scores.
    """
    _check_k(k)
    if r < 0:
        raise ValueError("r must be >= 0")
    if not len(store):
        return []
    q, qn = store.query_vector(query_text, embedder)
    return store.temporal(q, qn, t_q, k, r)


def retrieve_generic(store: Datastore, query_text: str, k: int, *, embedder: Embedder) -> list[ScoredEntry]:
    _check_k(k)
    if not len(store):
        return []
    q, qn = store.query_vector(query_text, embedder)
    return store.generic(q, qn, k)


def retrieve_hybrid(store: Datastore, query_text: str, t_q: DateStamp, k: int,
                    r: int = DEFAULT_R, *, embedder: Embedder) -> list[ScoredEntry]:
    """Temporal retrieval first, topped up with the best remaining entries by similarity."""
    _check_k(k)
    if not len(store):
        return []
    q, qn = store.query_vector(query_text, embedder)
    hits = store.temporal(q, qn, t_q, k, r)
    if len(hits) < k:
        hits += store.generic(q, qn, k - len(hits), exclude=[h.entry.id for h in hits])
    return hits


def save(store: Datastore, path: str | Path) -> None:
    """Write ``manifest.json``, ``entries.jsonl`` and ``vectors.f32`` under ``path``."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    manifest = {"version": FORMAT_VERSION, "dimension": store.dimension, "count": len(store), "label": store.label}
    with open(path / "entries.jsonl", "w", encoding="utf-8", newline="\n") as fh:
        for e in store.entries:
            rec = {"id": e.id, "date": format_datestamp(e.date), "text": e.text, "payload": _payload_json(e.payload)}
            fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")
    store.vectors.astype("<f4").tofile(path / "vectors.f32")
    (path / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load(path: str | Path, dimension: int | None = None) -> Datastore:
    """Read a store written by :func:`save`.

    Raises:
        VersionMismatch: unknown format version, a dimension other than the
            expected one, or a vector file whose size disagrees with the manifest.
        OSError: missing or unreadable files.
    """
    path = Path(path)
    manifest = json.loads((path / "manifest.json").read_text("utf-8"))
    if manifest.get("version") != FORMAT_VERSION:
        raise VersionMismatch(f"format version {manifest.get('version')} != {FORMAT_VERSION}")
    dim, count = int(manifest["dimension"]), int(manifest["count"])
    if dimension is not None and dim != dimension:
        raise VersionMismatch(f"store dimension {dim} != expected {dimension}")
    vec_path = path / "vectors.f32"
    if os.path.getsize(vec_path) != dim * count * 4:
        raise VersionMismatch(f"{vec_path} holds {os.path.getsize(vec_path)} bytes, manifest implies {dim * count * 4}")
    vectors = np.fromfile(vec_path, dtype="<f4").astype(np.float32).reshape(count, dim)
    entries = []
    with open(path / "entries.jsonl", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                entries.append(StoreEntry(rec["id"], parse_datestamp(rec["date"]), rec["text"],
                                          _payload_from_json(rec["payload"])))
    if len(entries) != count or any(e.id != i for i, e in enumerate(entries)):
        raise VersionMismatch("entries file disagrees with manifest count or id order")
    return Datastore(entries, vectors, dim, manifest.get("label", ""))

