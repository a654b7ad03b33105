"""Timing comparison of the compiled dyad kernels against the numpy fallback.

Run from the repository root after an editable install:

    python benchmarks/bench_kernels.py

Outputs are cross-checked for exact agreement before timing; a mismatch
aborts. Timings are the best of five wall-clock runs, so treat them as
throughput indicators rather than rigorous statistics.
"""

import sys
import time

import numpy as np

from netpartial.graphs import Graph
from netpartial.kernels import _ref

try:
    from netpartial.kernels import _fast
except ImportError:
    _fast = None


def _best_of(fn, repeats=5):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _check_equal(name, a, b):
    a = a if isinstance(a, tuple) else (a,)
    b = b if isinstance(b, tuple) else (b,)
    for left, right in zip(a, b):
        if not np.array_equal(np.asarray(left), np.asarray(right)):
            sys.exit(f"kernel mismatch in {name}")


def main():
    n = 2000
    rng = np.random.default_rng(0)
    memberships = np.repeat(np.arange(4, dtype=np.int64), n // 4)
    probs = np.full((4, 4), 0.002)
    np.fill_diagonal(probs, 0.02)
    nu = rng.uniform(0.02, 0.12, n)
    ii = rng.integers(0, n, 1_000_000).astype(np.int64)
    jj = rng.integers(0, n, 1_000_000).astype(np.int64)

    g = Graph.from_edges(n, *_ref.sample_block_graph(7, memberships, probs))
    indptr, indices = g.indptr, g.indices
    seeds = (rng.random(n) < 0.01).astype(np.uint8)
    thresholds = np.full(n, 2.0)
    coeffs = np.array([0.5, 0.25, 0.125])
    a = (rng.random(n) < 0.5).astype(np.float64)
    x = rng.standard_normal(n)

    cases = [
        ("dyad_uniforms", lambda m: m.dyad_uniforms(3, ii, jj)),
        ("sample_block_graph", lambda m: m.sample_block_graph(7, memberships, probs)),
        ("sample_product_graph", lambda m: m.sample_product_graph(9, nu)),
        ("threshold_cascade", lambda m: m.threshold_cascade(indptr, indices, seeds, thresholds, 5)),
        ("hearing_exposure", lambda m: m.hearing_exposure(indptr, indices, a, coeffs)),
        ("adjacency_matvec", lambda m: m.adjacency_matvec(indptr, indices, x)),
    ]

    if _fast is None:
        print("compiled extension not built; timing the numpy fallback only")
    header = f"{'kernel':24s} {'numpy':>10s}"
    if _fast is not None:
        header += f" {'compiled':>10s} {'speedup':>8s}"
    print(header)
    for name, call in cases:
        t_ref = _best_of(lambda: call(_ref))
        row = f"{name:24s} {t_ref * 1e3:9.2f}ms"
        if _fast is not None:
            _check_equal(name, call(_fast), call(_ref))
            t_fast = _best_of(lambda: call(_fast))
            row += f" {t_fast * 1e3:9.2f}ms {t_ref / t_fast:7.1f}x"
        print(row)


if __name__ == "__main__":
    main()
