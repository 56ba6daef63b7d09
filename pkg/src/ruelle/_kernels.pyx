# cython: language_level=3
"""Compiled inner loops for the grid transfer operator.

Both kernels mirror ``_kernels_py`` operation for operation so that the two
backends agree to the last bit on IEEE hardware without FMA contraction.
"""

from libc.math cimport floor
from libc.stdlib cimport malloc, free

import numpy as np


cdef inline double _interp(const double[::1] v, double lo, double hi, double step,
                           Py_ssize_t last, double y) noexcept nogil:
    cdef double u, s
    cdef Py_ssize_t k
    if y < lo:
        y = lo
    elif y > hi:
        y = hi
    u = (y - lo) / step
    k = <Py_ssize_t>floor(u)
    if k < 0:
        k = 0
    elif k > last:
        k = last
    s = u - k
    return (1.0 - s) * v[k] + s * v[k + 1]


def transfer_rows(const double[::1] values, double lo, double hi, double step,
                  const double[:, ::1] points, const double[:, ::1] weights,
                  double[::1] out, Py_ssize_t start, Py_ssize_t stop):
    """Fill ``out[start:stop]`` with the weighted interpolated branch sums."""
    cdef Py_ssize_t nb = points.shape[1]
    cdef Py_ssize_t last = values.shape[0] - 2
    cdef Py_ssize_t j, i, n, half
    cdef double *buf
    if nb == 0:
        for j in range(start, stop):
            out[j] = 0.0
        return
    buf = <double *>malloc(nb * sizeof(double))
    if buf == NULL:
        raise MemoryError()
    try:
        with nogil:
            for j in range(start, stop):
                for i in range(nb):
                    buf[i] = weights[j, i] * _interp(values, lo, hi, step, last, points[j, i])
                n = nb
                while n > 1:
                    half = n // 2
                    for i in range(half):
                        buf[i] = buf[2 * i] + buf[2 * i + 1]
                    if n % 2 == 1:
                        buf[half] = buf[n - 1]
                        n = half + 1
                    else:
                        n = half
                out[j] = buf[0]
    finally:
        free(buf)


def transfer_adjoint(const double[::1] r, double lo, double hi, double step,
                     const double[:, ::1] points, const double[:, ::1] weights,
                     double[::1] out):
    """Scatter ``r`` through the transposed operator into ``out`` (overwritten)."""
    cdef Py_ssize_t nrow = points.shape[0]
    cdef Py_ssize_t nb = points.shape[1]
    cdef Py_ssize_t last = r.shape[0] - 2
    cdef Py_ssize_t j, i, k
    cdef double y, u, s, c
    with nogil:
        for j in range(out.shape[0]):
            out[j] = 0.0
        for j in range(nrow):
            for i in range(nb):
                y = points[j, i]
                if y < lo:
                    y = lo
                elif y > hi:
                    y = hi
                u = (y - lo) / step
                k = <Py_ssize_t>floor(u)
                if k < 0:
                    k = 0
                elif k > last:
                    k = last
                s = u - k
                c = r[j] * weights[j, i]
                out[k] += (1.0 - s) * c
                out[k + 1] += s * c
