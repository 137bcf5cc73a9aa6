"""Pure-Python/numpy twins of the compiled kernels.

Every function returns results bit-identical to ``_ckernels``: cosine dot
products accumulate column by column in float64, which is the same
left-to-right order as the scalar C loop.
"""

from __future__ import annotations

import numpy as np


def jaccard_rows(indptr, indices, i, j):
    a = set(indices[indptr[i]:indptr[i + 1]].tolist())
    b = set(indices[indptr[j]:indptr[j + 1]].tolist())
    return _jaccard(a, b)


def _jaccard(a: set, b: set) -> float:
    if not a and not b:
        return 1.0
    if not a or not b:
        return 0.0
    inter = len(a & b)
    return inter / (len(a) + len(b) - inter)


def greedy_dedup(indptr, indices, days, threshold: float, window: int):
    n = len(indptr) - 1
    sets = [set(indices[indptr[i]:indptr[i + 1]].tolist()) for i in range(n)]
    days = [int(d) for d in days]
    assign = np.full(n, -1, dtype=np.int64)
    kept: list[int] = []
    for i in range(n):
        a = sets[i]
        for j in kept:
            if window >= 0 and abs(days[i] - days[j]) > window:
                continue
            b = sets[j]
            if a and b:
                lo, hi = sorted((len(a), len(b)))
                if lo / hi < threshold:
                    continue
            if _jaccard(a, b) >= threshold:
                assign[i] = j
                break
        if assign[i] < 0:
            kept.append(i)
    return assign


def row_norms(matrix):
    m = np.asarray(matrix, dtype=np.float64)
    acc = np.zeros(m.shape[0], dtype=np.float64)
    for k in range(m.shape[1]):
        col = m[:, k]
        acc += col * col
    return np.sqrt(acc)


def cosine_rows(matrix, norms, query, qnorm: float, rows):
    rows = np.asarray(rows, dtype=np.int64)
    sub = np.asarray(matrix, dtype=np.float32)[rows].astype(np.float64)
    q = np.asarray(query, dtype=np.float32).astype(np.float64)
    acc = np.zeros(rows.shape[0], dtype=np.float64)
    for k in range(sub.shape[1]):
        acc += sub[:, k] * q[k]
    denom = np.asarray(norms, dtype=np.float64)[rows] * float(qnorm)
    out = np.zeros_like(acc)
    nz = denom != 0.0
    out[nz] = acc[nz] / denom[nz]
    return out
