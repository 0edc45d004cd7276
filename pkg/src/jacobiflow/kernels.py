"""Kernel dispatch: compiled extension when importable, numpy otherwise.

Set ``JACOBIFLOW_PURE_PYTHON=1`` to force the numpy path.
"""

import os

import numpy as np

from . import _fallback

BACKEND = "numpy"
_impl = _fallback

if os.environ.get("JACOBIFLOW_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None
    if _compiled is not None:
        _impl = _compiled
        BACKEND = "cython"


def drift(x, p, q, sign=1.0):
    """Raw drift ``sign*((p-q)-(p+q)x_i+2 sum_j (1-x_i x_j)/(x_i-x_j))``."""
    return _impl.drift(np.ascontiguousarray(x, dtype=np.float64),
                       float(p), float(q), float(sign))


def drift_batch(X, p, q, sign=1.0):
    """Row-wise :func:`drift` for an ``(R, N)`` array."""
    return _impl.drift_batch(np.ascontiguousarray(X, dtype=np.float64),
                             float(p), float(q), float(sign))


def log_pair_sum(x):
    """``sum_{i<j} log|x_j - x_i|``."""
    return float(_impl.log_pair_sum(np.ascontiguousarray(x, dtype=np.float64)))


__all__ = ["BACKEND", "drift", "drift_batch", "log_pair_sum"]
