"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``."""

import numpy as np


def _pair_terms(X):
    # X has shape (R, n); returns (R, n, n) with zeros on the diagonal
    xi = X[:, :, None]
    xj = X[:, None, :]
    num = 1.0 - xi * xj
    den = xi - xj
    n = X.shape[1]
    eye = np.eye(n, dtype=bool)
    den = np.where(eye, 1.0, den)
    return np.where(eye, 0.0, num / den)


def drift_batch(X, p, q, sign=1.0):
    X = np.ascontiguousarray(X, dtype=np.float64)
    R, n = X.shape
    if R == 0 or n == 0:
        return np.empty((R, n))
    terms = _pair_terms(X)
    # cumulative sum keeps the ascending-j accumulation order of the compiled kernel
    acc = np.cumsum(terms, axis=2)[:, :, -1]
    return sign * ((p - q) - (p + q) * X + 2.0 * acc)


def drift(x, p, q, sign=1.0):
    x = np.ascontiguousarray(x, dtype=np.float64)
    return drift_batch(x[None, :], p, q, sign)[0]


def log_pair_sum(x):
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if n < 2:
        return 0.0
    i, j = np.triu_indices(n, 1)
    return float(np.cumsum(np.log(np.abs(x[j] - x[i])))[-1])
