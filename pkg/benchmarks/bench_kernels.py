"""Time the compiled and pure-Python kernel backends on the same inputs.

    python benchmarks/bench_kernels.py [--articles 400] [--entries 20000] [--repeat 3]
"""

import argparse
import sys
import timeit
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

import synth  # noqa: E402
from neon import kernels  # noqa: E402
from neon.corpus import Chunk, _trigram_csr, chunk_article, parse_article  # noqa: E402


def dedup_inputs(n_articles: int):
    raw = []
    for a in synth.synthetic_articles(n_articles, seed=7):
        raw.extend(chunk_article(parse_article(a)))
    raw.sort(key=Chunk.sort_key)
    indptr, flat = _trigram_csr([c.text for c in raw])
    days = np.asarray([c.date.toordinal() for c in raw], dtype=np.int64)
    return (indptr, flat, days, 0.8, -1), len(raw)


def cosine_inputs(n: int, dim: int = 256):
    rng = np.random.default_rng(0)
    mat = rng.standard_normal((n, dim)).astype(np.float32)
    q = rng.standard_normal(dim).astype(np.float32)
    return mat, q


def best(fn, repeat: int) -> float:
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--articles", type=int, default=400)
    ap.add_argument("--entries", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    impls = kernels.backends()
    dedup_args, n_chunks = dedup_inputs(args.articles)
    mat, q = cosine_inputs(args.entries)
    rows = np.arange(len(mat), dtype=np.int64)

    print(f"active backend: {kernels.BACKEND}; available: {', '.join(impls)}")
    print(f"{'kernel':<22}{'backend':<10}{'seconds':>10}")
    results = {}
    for name, impl in impls.items():
        norms = impl.row_norms(mat)
        qn = float(impl.row_norms(q.reshape(1, -1))[0])
        timings = {
            f"greedy_dedup n={n_chunks}": best(lambda: impl.greedy_dedup(*dedup_args), args.repeat),
            f"row_norms n={len(mat)}": best(lambda: impl.row_norms(mat), args.repeat),
            f"cosine_rows n={len(mat)}": best(lambda: impl.cosine_rows(mat, norms, q, qn, rows), args.repeat),
        }
        for kernel, secs in timings.items():
            print(f"{kernel:<22}{name:<10}{secs:>10.4f}")
            results.setdefault(kernel, {})[name] = secs
    if len(impls) > 1:
        for kernel, by in results.items():
            print(f"speedup {kernel}: {by['python'] / by['cython']:.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
