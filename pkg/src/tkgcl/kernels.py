"""Hot message-passing kernels with a numba fast path and a numpy fallback.

The jitted path is used whenever numba imports cleanly; set
``TKGCL_DISABLE_NUMBA=1`` to force the pure-numpy implementation (useful for
debugging and for the benchmark in benchmarks/bench_kernels.py). Both paths
iterate edges in the same order, so results agree to the last bit for the
forward scatter and to float addition order for the backward one.
"""

import os

import numpy as np


def _numba_available():
    if os.environ.get("TKGCL_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes"}:
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


NUMBA_ENABLED = _numba_available()


def aggregate_messages_numpy(h, rel_emb, src, rel, obj, num_entities):
    """Sum (h[src] + rel_emb[rel]) into rows obj of a fresh (V, d) matrix."""
    out = np.zeros((num_entities, h.shape[1]), dtype=h.dtype)
    if len(src):
        np.add.at(out, obj, h[src] + rel_emb[rel])
    return out


def aggregate_backward_numpy(d_agg, src, rel, obj, d_h, d_rel):
    """Backward of aggregate_messages: scatter d_agg[obj] into src/rel rows."""
    if len(src):
        rows = d_agg[obj]
        np.add.at(d_h, src, rows)
        np.add.at(d_rel, rel, rows)


if NUMBA_ENABLED:
    from numba import njit

    @njit(cache=True)
    def _aggregate_jit(h, rel_emb, src, rel, obj, out):
        d = h.shape[1]
        for e in range(src.shape[0]):
            s = src[e]
            r = rel[e]
            o = obj[e]
            for j in range(d):
                out[o, j] += h[s, j] + rel_emb[r, j]

    @njit(cache=True)
    def _aggregate_backward_jit(d_agg, src, rel, obj, d_h, d_rel):
        d = d_agg.shape[1]
        for e in range(src.shape[0]):
            s = src[e]
            r = rel[e]
            o = obj[e]
            for j in range(d):
                g = d_agg[o, j]
                d_h[s, j] += g
                d_rel[r, j] += g

    def aggregate_messages_numba(h, rel_emb, src, rel, obj, num_entities):
        out = np.zeros((num_entities, h.shape[1]), dtype=h.dtype)
        if len(src):
            _aggregate_jit(h, rel_emb, src, rel, obj, out)
        return out

    def aggregate_backward_numba(d_agg, src, rel, obj, d_h, d_rel):
        if len(src):
            _aggregate_backward_jit(d_agg, src, rel, obj, d_h, d_rel)

    aggregate_messages = aggregate_messages_numba
    aggregate_backward = aggregate_backward_numba
else:
    aggregate_messages = aggregate_messages_numpy
    aggregate_backward = aggregate_backward_numpy


def in_degree(obj, num_entities):
    """In-degree per entity; isolated entities get degree 1 for normalization."""
    deg = np.bincount(obj, minlength=num_entities).astype(np.float64)
    return np.maximum(deg, 1.0)
