"""Backend selection for the grid transfer kernels.

The compiled extension is used when it imports; otherwise the numpy fallback
runs. Set ``RUELLE_PURE_PYTHON=1`` to force the fallback and
``RUELLE_WORKERS=<n>`` to split operator rows over a thread pool.
"""

from __future__ import annotations

import contextlib
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import _kernels_py

try:
    if os.environ.get("RUELLE_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure python requested")
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

_BACKENDS = {"python": _kernels_py}
if _compiled is not None:
    _BACKENDS["cython"] = _compiled

_state = {
    "backend": "cython" if _compiled is not None else "python",
    "workers": max(1, int(os.environ.get("RUELLE_WORKERS", "1") or 1)),
}


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def backend() -> str:
    return _state["backend"]


def workers() -> int:
    return _state["workers"]


def set_backend(name: str) -> None:
    if name not in _BACKENDS:
        raise ValueError(f"backend {name!r} not available (have {available_backends()})")
    _state["backend"] = name


def set_workers(n: int) -> None:
    if n < 1:
        raise ValueError("workers must be >= 1")
    _state["workers"] = int(n)


@contextlib.contextmanager
def using(backend_name: str | None = None, n_workers: int | None = None):
    """Temporarily switch backend and/or worker count."""
    saved = dict(_state)
    try:
        if backend_name is not None:
            set_backend(backend_name)
        if n_workers is not None:
            set_workers(n_workers)
        yield
    finally:
        _state.update(saved)


# below this many (node, branch) pairs a thread pool costs more than it saves
MIN_PARALLEL_WORK = 1 << 16
_pools = {}


def _pool(n):
    if n not in _pools:
        _pools[n] = ThreadPoolExecutor(max_workers=n, thread_name_prefix="ruelle")
    return _pools[n]


def transfer(values, lo, hi, step, points, weights):
    """Row-wise sums ``sum_i w[j, i] * f(points[j, i])`` for the linear interpolant f."""
    mod = _BACKENDS[_state["backend"]]
    values = np.ascontiguousarray(values, dtype=np.float64)
    out = np.empty(points.shape[0])
    n = points.shape[0]
    nw = min(_state["workers"], n)
    if nw <= 1 or points.size < MIN_PARALLEL_WORK:
        mod.transfer_rows(values, lo, hi, step, points, weights, out, 0, n)
        return out
    # rows are independent, so the split does not change any output bit
    bounds = np.linspace(0, n, nw + 1).astype(int)
    jobs = [
        _pool(nw).submit(mod.transfer_rows, values, lo, hi, step, points, weights, out, a, b)
        for a, b in zip(bounds[:-1], bounds[1:])
    ]
    for job in jobs:
        job.result()
    return out


def transfer_adjoint(r, lo, hi, step, points, weights):
    mod = _BACKENDS[_state["backend"]]
    out = np.empty(points.shape[0])
    mod.transfer_adjoint(np.ascontiguousarray(r, dtype=np.float64), lo, hi, step, points, weights, out)
    return out
