import datetime as dt
import json
import random

import numpy as np
import pytest

import synth
from oracles import cosine_oracle, generic_oracle, temporal_oracle
from neon.corpus import ingest
from neon.datastore import (
    BACKOFF, EXACT, FORMAT_VERSION, cosine, index, load, retrieve_generic, retrieve_hybrid, retrieve_temporal,
    save,
)
from neon.errors import DimensionMismatch, VersionMismatch
from neon.providers import HashingEmbedder

EMB = HashingEmbedder(64)


@pytest.fixture(scope="module")
def store():
    return index(synth.interaction_items(1000), EMB, "neon-m2")


def as_tuples(hits):
    return [(h.entry.id, h.score, h.tier) for h in hits]


def test_cosine_matches_oracle():
    rng = np.random.default_rng(0)
    for _ in range(50):
        a, b = rng.standard_normal((2, 37)).astype(np.float32)
        assert cosine(a, b) == cosine_oracle(a, b)
    assert cosine([0, 0], [1, 1]) == 0.0
    assert cosine([1, 2], [2, 4]) == pytest.approx(1.0)
    with pytest.raises(DimensionMismatch):
        cosine([1, 2], [1, 2, 3])


def test_temporal_and_generic_match_oracles(store):
    rng = random.Random(8)
    base = dt.date(2023, 6, 1)
    for _ in range(60):
        text = synth.random_query(rng)
        t_q = base + dt.timedelta(days=rng.randrange(-3, 44))
        k, r = rng.randint(1, 20), rng.randint(0, 5)
        q = np.asarray(EMB.embed(text), dtype=np.float32)
        got = as_tuples(retrieve_temporal(store, text, t_q, k, r, embedder=EMB))
        assert got == temporal_oracle(store.entries, store.vectors, q, t_q, k, r)
        assert all(abs((store.entries[i].date - t_q).days) <= r for i, _, _ in got)
        assert as_tuples(retrieve_generic(store, text, k, embedder=EMB)) == \
            generic_oracle(store.entries, store.vectors, q, k)


def test_exact_tier_precedes_backoff():
    items = synth.interaction_items(30, seed=2, days=5)
    small = index(items, EMB)
    t_q = items[0].date
    hits = retrieve_temporal(small, items[0].text, t_q, 30, 2, embedder=EMB)
    tiers = [h.tier for h in hits]
    assert tiers == sorted(tiers, key=lambda t: t != EXACT)
    assert sum(t == EXACT for t in tiers) == sum(i.date == t_q for i in items)
    assert all(h.entry.date != t_q for h in hits if h.tier == BACKOFF)


def test_no_entries_in_range_returns_empty(store):
    assert retrieve_temporal(store, "river", dt.date(2030, 1, 1), 5, 3, embedder=EMB) == []
    assert len(retrieve_generic(store, "river", 5, embedder=EMB)) == 5


def test_hybrid_fills_from_generic(store):
    t_q = dt.date(2030, 1, 1)
    hits = retrieve_hybrid(store, "river bridge", t_q, 7, 3, embedder=EMB)
    assert as_tuples(hits) == as_tuples(retrieve_generic(store, "river bridge", 7, embedder=EMB))
    near = retrieve_hybrid(store, "river bridge", dt.date(2023, 6, 3), 50, 0, embedder=EMB)
    ids = [h.entry.id for h in near]
    assert len(ids) == len(set(ids)) == 50


def test_ties_break_by_id():
    items = synth.interaction_items(5, seed=4)
    items = [type(i)(items[0].date, "A", "B", "same text", "M2") for i in items]
    hits = retrieve_generic(index(items, EMB), "same text", 3, embedder=EMB)
    assert [h.entry.id for h in hits] == [0, 1, 2]


def test_bad_parameters(store):
    with pytest.raises(ValueError):
        retrieve_generic(store, "x", 0, embedder=EMB)
    with pytest.raises(ValueError):
        retrieve_temporal(store, "x", dt.date(2023, 6, 1), 3, -1, embedder=EMB)
    with pytest.raises(DimensionMismatch):
        retrieve_generic(store, "x", 3, embedder=HashingEmbedder(8))


def test_save_load_roundtrip(tmp_path, store):
    save(store, tmp_path / "s")
    back = load(tmp_path / "s")
    assert back.vectors.tobytes() == store.vectors.tobytes()
    assert back.entries == store.entries and back.label == "neon-m2"
    manifest = json.loads((tmp_path / "s" / "manifest.json").read_text())
    assert manifest["version"] == FORMAT_VERSION and manifest["count"] == 1000 and manifest["dimension"] == 64
    # vector file is raw little-endian float32 at offset id * dimension
    raw = np.fromfile(tmp_path / "s" / "vectors.f32", dtype="<f4")
    assert raw[17 * 64:18 * 64].tobytes() == store.vectors[17].astype("<f4").tobytes()
    for text in ("river", "Alder market"):
        assert as_tuples(retrieve_generic(back, text, 10, embedder=EMB)) == \
            as_tuples(retrieve_generic(store, text, 10, embedder=EMB))


def test_chunk_store_roundtrip(tmp_path):
    chunks, _ = ingest(synth.synthetic_articles(10, seed=3))
    s = index(chunks, EMB, "newsrag")
    save(s, tmp_path / "c")
    assert load(tmp_path / "c").entries == s.entries


def test_version_and_dimension_mismatch(tmp_path, store):
    save(store, tmp_path / "s")
    with pytest.raises(VersionMismatch):
        load(tmp_path / "s", dimension=32)
    m = tmp_path / "s" / "manifest.json"
    data = json.loads(m.read_text())
    data["version"] = 99
    m.write_text(json.dumps(data))
    with pytest.raises(VersionMismatch):
        load(tmp_path / "s")
    data["version"] = FORMAT_VERSION
    data["count"] = 999
    m.write_text(json.dumps(data))
    with pytest.raises(VersionMismatch):
        load(tmp_path / "s")


def test_store_is_read_only(store):
    with pytest.raises(ValueError):
        store.vectors[0, 0] = 1.0


class FlakyEmbedder(HashingEmbedder):
    def embed(self, text):
        if "Thorn" in text:
            raise RuntimeError("embedding service down")
        return super().embed(text)


def test_embed_failures_are_skipped():
    items = synth.interaction_items(50, seed=6)
    s = index(items, FlakyEmbedder(64))
    assert s.embed_failures == sum("Thorn" in i.text for i in items) > 0
    assert len(s) + s.embed_failures == 50
    assert [e.id for e in s.entries] == list(range(len(s)))
