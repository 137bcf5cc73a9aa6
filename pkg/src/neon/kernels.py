"""Kernel backend selection.

The compiled extension is used when it was built; otherwise the numpy
fallback takes over. Set ``NEON_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("NEON_PURE_PYTHON"):
    _impl = _kernels_py
else:
    try:
        from . import _ckernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = _kernels_py

BACKEND = "cython" if _impl is not _kernels_py else "python"

greedy_dedup = _impl.greedy_dedup
jaccard_rows = _impl.jaccard_rows
row_norms = _impl.row_norms
cosine_rows = _impl.cosine_rows


def backends() -> dict:
    """All importable backends by name, for differential tests and benchmarks."""
    found = {"python": _kernels_py}
    try:
        from . import _ckernels  # type: ignore[attr-defined]
    except ImportError:
        pass
    else:
        found["cython"] = _ckernels
    return found
