# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled pairwise drift kernels.

The pair sum is accumulated in ascending ``j`` so that results do not
depend on the compiler's vectorisation choices.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport log, fabs

cnp.import_array()


cdef inline void _drift_row(const double* x, Py_ssize_t n, double p, double q,
                            double sign, double* out) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double xi, acc
    for i in range(n):
        xi = x[i]
        acc = 0.0
        for j in range(n):
            if j != i:
                acc += (1.0 - xi * x[j]) / (xi - x[j])
        out[i] = sign * ((p - q) - (p + q) * xi + 2.0 * acc)


def drift(cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] x, double p, double q,
          double sign=1.0):
    cdef Py_ssize_t n = x.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] out = np.empty(n)
    if n == 0:
        return out
    with nogil:
        _drift_row(&x[0], n, p, q, sign, &out[0])
    return out


def drift_batch(cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] X, double p,
                double q, double sign=1.0):
    cdef Py_ssize_t r, R = X.shape[0], n = X.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] out = np.empty((R, n))
    if R == 0 or n == 0:
        return out
    with nogil:
        for r in range(R):
            _drift_row(&X[r, 0], n, p, q, sign, &out[r, 0])
    return out


def log_pair_sum(cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] x):
    """Sum of log|x_j - x_i| over i < j, ascending order."""
    cdef Py_ssize_t i, j, n = x.shape[0]
    cdef double acc = 0.0, d
    with nogil:
        for i in range(n):
            for j in range(i + 1, n):
                d = fabs(x[j] - x[i])
                acc += log(d)
    return acc
