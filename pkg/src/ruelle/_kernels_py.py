"""Pure numpy versions of the grid transfer kernels.

The arithmetic follows ``_kernels.pyx`` step for step (same clamping, same
interpolation formula, same pairwise reduction tree).
"""

import numpy as np


def _locate(y, lo, hi, step, last):
    u = (np.clip(y, lo, hi) - lo) / step
    k = np.clip(np.floor(u).astype(np.intp), 0, last)
    return k, u - k


def pairwise_rows(terms):
    """Sum each row of ``terms`` with a fixed binary tree (left to right pairs)."""
    a = terms
    n = a.shape[1]
    if n == 0:
        return np.zeros(a.shape[0])
    while n > 1:
        half = n // 2
        s = a[:, 0 : 2 * half : 2] + a[:, 1 : 2 * half : 2]
        if n % 2 == 1:
            s = np.concatenate([s, a[:, n - 1 : n]], axis=1)
        a = s
        n = a.shape[1]
    return a[:, 0].copy()


def transfer_rows(values, lo, hi, step, points, weights, out, start, stop):
    rows = slice(start, stop)
    k, s = _locate(points[rows], lo, hi, step, values.shape[0] - 2)
    interp = (1.0 - s) * values[k] + s * values[k + 1]
    out[rows] = pairwise_rows(weights[rows] * interp)


def transfer_adjoint(r, lo, hi, step, points, weights, out):
    k, s = _locate(points, lo, hi, step, r.shape[0] - 2)
    c = r[:, None] * weights
    idx = np.stack([k, k + 1], axis=-1).ravel()
    vals = np.stack([(1.0 - s) * c, s * c], axis=-1).ravel()
    out[:] = 0.0
    # np.add.at accumulates in index order, same as the compiled scatter loop
    np.add.at(out, idx, vals)
