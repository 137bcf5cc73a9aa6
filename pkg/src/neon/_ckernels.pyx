# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops: greedy trigram-Jaccard dedup and exhaustive cosine scan.

Semantics match ``neon._kernels_py`` bit for bit. Dot products accumulate in
double, strictly left to right, with FMA contraction disabled at build time.
"""

import numpy as np

from libc.math cimport sqrt
from libc.stdint cimport int64_t


cdef inline double _jaccard(const int64_t[:] idx, int64_t a0, int64_t a1,
                            int64_t b0, int64_t b1) noexcept nogil:
    cdef int64_t la = a1 - a0
    cdef int64_t lb = b1 - b0
    cdef int64_t inter = 0
    if la == 0 and lb == 0:
        return 1.0
    if la == 0 or lb == 0:
        return 0.0
    while a0 < a1 and b0 < b1:
        if idx[a0] == idx[b0]:
            inter += 1
            a0 += 1
            b0 += 1
        elif idx[a0] < idx[b0]:
            a0 += 1
        else:
            b0 += 1
    return <double>inter / <double>(la + lb - inter)


def jaccard_rows(const int64_t[:] indptr, const int64_t[:] indices, Py_ssize_t i, Py_ssize_t j):
    return _jaccard(indices, indptr[i], indptr[i + 1], indptr[j], indptr[j + 1])


def greedy_dedup(const int64_t[:] indptr, const int64_t[:] indices,
                 const int64_t[:] days, double threshold, int64_t window):
    """Return ``assign`` where assign[i] is the retained row i merges into, or -1."""
    cdef Py_ssize_t n = indptr.shape[0] - 1
    out = np.full(n, -1, dtype=np.int64)
    cdef int64_t[:] assign = out
    cdef int64_t[:] kept = np.empty(max(n, 1), dtype=np.int64)
    cdef Py_ssize_t nkept = 0
    cdef Py_ssize_t i, r
    cdef int64_t j, la, lb, lo, hi, dd
    cdef double ratio
    with nogil:
        for i in range(n):
            la = indptr[i + 1] - indptr[i]
            for r in range(nkept):
                j = kept[r]
                if window >= 0:
                    dd = days[i] - days[j]
                    if dd < 0:
                        dd = -dd
                    if dd > window:
                        continue
                lb = indptr[j + 1] - indptr[j]
                if la > 0 and lb > 0:
                    lo = la if la < lb else lb
                    hi = lb if la < lb else la
                    ratio = <double>lo / <double>hi
                    if ratio < threshold:
                        continue
                if _jaccard(indices, indptr[i], indptr[i + 1], indptr[j], indptr[j + 1]) >= threshold:
                    assign[i] = j
                    break
            if assign[i] < 0:
                kept[nkept] = i
                nkept += 1
    return out


def row_norms(const float[:, :] matrix):
    cdef Py_ssize_t n = matrix.shape[0]
    cdef Py_ssize_t d = matrix.shape[1]
    out = np.empty(n, dtype=np.float64)
    cdef double[:] norms = out
    cdef Py_ssize_t i, k
    cdef double acc, x
    with nogil:
        for i in range(n):
            acc = 0.0
            for k in range(d):
                x = matrix[i, k]
                acc = acc + x * x
            norms[i] = sqrt(acc)
    return out


def cosine_rows(const float[:, :] matrix, const double[:] norms,
                const float[:] query, double qnorm, const int64_t[:] rows):
    cdef Py_ssize_t m = rows.shape[0]
    cdef Py_ssize_t d = matrix.shape[1]
    out = np.empty(m, dtype=np.float64)
    cdef double[:] scores = out
    cdef Py_ssize_t t, k
    cdef int64_t i
    cdef double acc, denom
    with nogil:
        for t in range(m):
            i = rows[t]
            denom = norms[i] * qnorm
            if denom == 0.0:
                scores[t] = 0.0
                continue
            acc = 0.0
            for k in range(d):
                acc = acc + (<double>matrix[i, k]) * (<double>query[k])
            scores[t] = acc / denom
    return out
