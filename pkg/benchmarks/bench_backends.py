"""Timing comparison of the numba and fallback paths for the hot kernels.

Run twice to see warm-cache numbers (numba compiles on first use):

    python benchmarks/bench_backends.py [--quick]

The numba path is selected by default; the fallback timings here call the
fallback implementations directly, so one process measures both.
"""

import argparse
import time

import numpy as np

from nodalcount import kernels
from nodalcount.backend import USING_NUMBA, backend_name


def timeit(fn, *args, repeats=3):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_eval_monomials(npts, degree, quick):
    rng = np.random.default_rng(0)
    from nodalcount.ensemble import EnsembleSpec, multi_indices

    spec = EnsembleSpec(2, degree)
    exps = np.asarray(multi_indices(spec))
    coeffs = rng.standard_normal(spec.basis_size)
    pts = rng.normal(size=(npts, 3))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    t_fast, a = timeit(kernels.eval_monomials, pts, exps, coeffs)
    t_slow, b = timeit(kernels.eval_monomials_numpy, pts, exps, coeffs)
    err = np.abs(a - b).max() / max(np.abs(a).max(), 1e-30)
    return f"eval_monomials (m={degree}, {npts} pts)", t_fast, t_slow, err


def bench_eval_spectral(npts, nfreq, quick):
    rng = np.random.default_rng(1)
    pts = rng.uniform(-6, 6, size=(npts, 3))
    freqs = rng.normal(size=(nfreq, 3))
    freqs /= np.maximum(1.0, np.linalg.norm(freqs, axis=1, keepdims=True))
    phases = rng.uniform(0, 2 * np.pi, nfreq)
    t_fast, a = timeit(kernels.eval_spectral, pts, freqs, phases, 0.1)
    t_slow, b = timeit(kernels.eval_spectral_numpy, pts, freqs, phases, 0.1)
    err = np.abs(a - b).max() / max(np.abs(a).max(), 1e-30)
    return f"eval_spectral ({npts} pts, M={nfreq})", t_fast, t_slow, err


def bench_marching_squares(res, quick):
    from nodalcount.topology import _box_quad_structure

    struct = _box_quad_structure(res, res)
    x = np.linspace(-6, 6, res)
    vals = np.cos(3 * x)[:, None] * np.cos(2 * x)[None, :] - 0.1
    positive = (vals.ravel() > 0)
    center = np.zeros(len(struct.quads), dtype=np.int8)
    sm = kernels.saddle_mask(struct.quads, positive)
    center[sm] = 1
    t_fast, a = timeit(kernels.march_quads, struct.quads, struct.quad_edges,
                       positive, center)
    t_slow, b = timeit(kernels.march_quads_numpy, struct.quads,
                       struct.quad_edges, positive, center)
    same = set(map(tuple, np.sort(a[0], axis=1))) == set(map(tuple, np.sort(b[0], axis=1)))
    return f"march_quads ({res}x{res})", t_fast, t_slow, 0.0 if same else np.inf


def bench_greedy_pack(radius, quick):
    from nodalcount.experiments import _sphere_candidates

    cands = _sphere_candidates(2, radius)
    cos2r = np.cos(2 * radius)
    t_fast, a = timeit(kernels.greedy_pack, cands, cos2r, None, repeats=1)
    t_slow, b = timeit(kernels.greedy_pack_numpy, cands, cos2r,
                       np.empty((0, 3)), 0, repeats=1)
    same = np.array_equal(a, b)
    return f"greedy_pack (r={radius}, {len(cands)} candidates)", t_fast, t_slow, \
        0.0 if same else np.inf


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--quick", action="store_true")
    args = ap.parse_args()
    q = args.quick

    print(f"active backend: {backend_name()} (numba compiled: {USING_NUMBA})")
    rows = [
        bench_eval_monomials(20_000 if q else 200_000, 20, q),
        bench_eval_spectral(20_000 if q else 100_000, 512, q),
        bench_marching_squares(257 if q else 513, q),
        bench_greedy_pack(0.1 if q else 0.05, q),
    ]
    width = max(len(r[0]) for r in rows) + 2
    print(f"{'kernel':<{width}}{'numba/jit':>12}{'fallback':>12}{'speedup':>9}  agreement")
    for name, tf, ts, err in rows:
        print(f"{name:<{width}}{tf:>11.4f}s{ts:>11.4f}s{ts / tf:>8.1f}x  {err:.2e}")
    if not USING_NUMBA:
        print("note: numba disabled (NODALCOUNT_NUMBA=0); both columns ran the fallback")


if __name__ == "__main__":
    main()
