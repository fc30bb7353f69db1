#!/usr/bin/env python3
"""Benchmark the jitted message-passing kernels against the numpy fallback.

The numba path is selected by default at import; TKGCL_DISABLE_NUMBA=1 forces
the numpy path package-wide. This script times both implementations directly,
so it reports the comparison regardless of the flag.

Usage: python benchmarks/bench_kernels.py [--dim 200] [--repeats 5]
"""

import argparse
import time

import numpy as np

from tkgcl import kernels


def timeit(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench(num_entities, n_edges, dim, repeats):
    rng = np.random.default_rng(0)
    h = rng.standard_normal((num_entities, dim))
    rel_emb = rng.standard_normal((2 * 240, dim))
    src = rng.integers(0, num_entities, n_edges)
    rel = rng.integers(0, rel_emb.shape[0], n_edges)
    obj = rng.integers(0, num_entities, n_edges)
    d_agg = rng.standard_normal((num_entities, dim))

    rows = []
    fwd_np = timeit(lambda: kernels.aggregate_messages_numpy(h, rel_emb, src, rel, obj, num_entities), repeats)
    bwd_np = timeit(lambda: kernels.aggregate_backward_numpy(
        d_agg, src, rel, obj, np.zeros_like(h), np.zeros_like(rel_emb)), repeats)
    rows.append(("numpy", fwd_np, bwd_np))
    if kernels.NUMBA_ENABLED:
        # warm the jit cache before timing
        kernels.aggregate_messages_numba(h, rel_emb, src, rel, obj, num_entities)
        kernels.aggregate_backward_numba(d_agg, src, rel, obj, np.zeros_like(h), np.zeros_like(rel_emb))
        fwd_nb = timeit(lambda: kernels.aggregate_messages_numba(h, rel_emb, src, rel, obj, num_entities), repeats)
        bwd_nb = timeit(lambda: kernels.aggregate_backward_numba(
            d_agg, src, rel, obj, np.zeros_like(h), np.zeros_like(rel_emb)), repeats)
        rows.append(("numba", fwd_nb, bwd_nb))
    return rows


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--dim", type=int, default=200)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    print(f"{'entities':>9} {'edges':>9} {'path':>6} {'fwd ms':>10} {'bwd ms':>10} {'speedup':>8}")
    for num_entities, n_edges in ((500, 5_000), (5_000, 50_000), (10_000, 500_000)):
        rows = bench(num_entities, n_edges, args.dim, args.repeats)
        base_fwd = rows[0][1]
        for name, fwd, bwd in rows:
            speed = f"{base_fwd / fwd:10.1f}x" if name != "numpy" else "      1.0x"
            print(f"{num_entities:>9} {n_edges:>9} {name:>6} {fwd * 1e3:>10.2f} "
                  f"{bwd * 1e3:>10.2f} {speed:>8}")


if __name__ == "__main__":
    main()
