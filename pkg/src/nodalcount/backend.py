"""Backend selection for the hot numeric kernels.

Every compute-heavy inner loop in this package (monomial evaluation on grids,
spectral field sums, marching-cell sweeps, union-find, greedy packing) exists
in two forms: a loop kernel compiled with numba's @njit, and a fallback that
runs without numba (vectorized numpy where the operation vectorizes naturally,
plain Python otherwise). Selection happens once at import time:

    NODALCOUNT_NUMBA=0   force the fallback path
    (unset / any other)  use numba when importable

``benchmarks/bench_backends.py`` times the two paths against each other.
"""

import os

ENV_FLAG = "NODALCOUNT_NUMBA"

NUMBA_REQUESTED = os.environ.get(ENV_FLAG, "1").strip().lower() not in (
    "0", "false", "off", "no",
)

try:
    import numba  # noqa: F401
    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    NUMBA_AVAILABLE = False

USING_NUMBA = NUMBA_REQUESTED and NUMBA_AVAILABLE


def jit_kernel(fn=None, *, fastmath=False):
    """Compile ``fn`` with numba when the numba backend is active.

    The compiled function keeps the original under ``.py_func`` so tests can
    compare the two paths directly. ``fastmath`` is reserved for pure
    floating-point evaluation kernels; combinatorial sweeps stay strict.
    """
    def wrap(f):
        if USING_NUMBA:
            from numba import njit

            return njit(cache=True, nogil=True, fastmath=fastmath)(f)
        return f

    return wrap if fn is None else wrap(fn)


def backend_name() -> str:
    return "numba" if USING_NUMBA else "numpy"
