"""Brute-force reference implementations, written independently of the package."""

from __future__ import annotations

import math
import re

import numpy as np


def _tri(text):
    toks = re.sub(r"[^\w\s]", "", text.lower()).split()
    return {tuple(toks[i:i + 3]) for i in range(len(toks) - 2)}


def _jac(a, b):
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


def dedup_oracle(chunks, threshold):
    """All-pairs greedy oracle with its own trigram sets."""
    order = sorted(chunks, key=lambda c: (c.date, c.article_id, c.offset, c.id))
    tris = [_tri(c.text) for c in order]
    sim = [[_jac(a, b) for b in tris] for a in tris]
    kept, extra = [], {}
    for i, c in enumerate(order):
        hit = next((j for j in kept if sim[i][j] >= threshold), None)
        if hit is None:
            kept.append(i)
        else:
            extra.setdefault(hit, []).extend(c.provenance)
    return [(order[i].id, order[i].provenance + tuple(extra.get(i, ()))) for i in kept]


def brute_force_pairs(chunks, subject, top_p):
    n = len(chunks)
    objects = {o for c in chunks if subject in c.entities for o in c.entities} - {subject}
    scores = []
    for o in objects:
        tf = sum(1 for c in chunks if subject in c.entities and o in c.entities)
        df = sum(1 for c in chunks if o in c.entities)
        scores.append((o, tf * math.log(n / (1 + df))))
    scores.sort(key=lambda x: x[0])
    scores.sort(key=lambda x: x[1], reverse=True)  # stable: ties keep lexicographic order
    return [(subject, o, s) for o, s in scores[:top_p]]


def spike_oracle(counts, window=3):
    """Indices flagged by numpy rolling sums (days before the start count as zero) and population SD."""
    c = np.asarray(counts, dtype=np.float64)
    sums = np.convolve(c, np.ones(window))[: len(c)]
    mu, sd = sums.mean(), sums.std()
    return [int(i) for i in np.flatnonzero(sums > mu + sd)]


def cosine_oracle(v, q):
    """Cosine with float64 accumulation in index order over float32 inputs."""
    dot = nv = nq = 0.0
    for a, b in zip(v, q):
        a, b = float(a), float(b)
        dot += a * b
        nv += a * a
        nq += b * b
    denom = math.sqrt(nv) * math.sqrt(nq)
    return dot / denom if denom != 0.0 else 0.0


def rank(cands, k):
    return sorted(cands, key=lambda x: (-x[1], x[0]))[:k]


def temporal_oracle(entries, vectors, q, t_q, k, r):
    """[(id, score, tier)]: exact-date entries by score, then 0 < |delta| <= r back-off."""
    exact = [(e.id, cosine_oracle(vectors[e.id], q)) for e in entries if e.date == t_q]
    out = [(i, s, "exact-date") for i, s in rank(exact, k)]
    if len(out) < k and r > 0:
        near = [(e.id, cosine_oracle(vectors[e.id], q)) for e in entries
                if 0 < abs((e.date - t_q).days) <= r]
        out += [(i, s, "backoff") for i, s in rank(near, k - len(out))]
    return out


def generic_oracle(entries, vectors, q, k):
    return [(i, s, "generic") for i, s in rank([(e.id, cosine_oracle(vectors[e.id], q)) for e in entries], k)]
