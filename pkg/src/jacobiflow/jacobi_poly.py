"""Classical Jacobi polynomials ``P_n^(alpha, beta)``: values and zeros."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import DomainError

_RESCALE = 1e150


@dataclass(frozen=True)
class JacobiParams:
    n: int
    alpha: float
    beta: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 0:
            raise DomainError(f"degree must be a nonnegative integer, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        if not (self.alpha > -1 and self.beta > -1):
            raise DomainError(f"need alpha, beta > -1, got ({self.alpha}, {self.beta})")

    @classmethod
    def from_model(cls, N, p, q):
        """Parameters whose zeros are the stationary point of the frozen flow."""
        return cls(int(N), float(q) - N, float(p) - N)


def _recurrence(n, a, b, x):
    """Run the three-term recurrence up to degree ``n``.

    Returns ``(P_n, P_{n-1}, log_scale)`` where the true values are the
    returned ones times ``exp(log_scale)``. Rescaling keeps huge
    parameters from overflowing.
    """
    x = np.asarray(x, dtype=float)
    p0 = np.ones_like(x)
    logs = np.zeros_like(x)
    if n == 0:
        return p0, np.zeros_like(x), logs
    p1 = (a + b + 2.0) * x / 2.0 + (a - b) / 2.0
    for k in range(2, n + 1):
        s = 2 * k + a + b
        c1 = 2.0 * k * (k + a + b) * (s - 2.0)
        c2 = (s - 1.0) * (s * (s - 2.0) * x + a * a - b * b)
        c3 = 2.0 * (k + a - 1.0) * (k + b - 1.0) * s
        p0, p1 = p1, (c2 * p1 - c3 * p0) / c1
        big = np.maximum(np.abs(p1), np.abs(p0)) > _RESCALE
        if np.any(big):
            p0 = np.where(big, p0 / _RESCALE, p0)
            p1 = np.where(big, p1 / _RESCALE, p1)
            logs = logs + np.where(big, np.log(_RESCALE), 0.0)
    return p1, p0, logs


def eval_jacobi(jp: JacobiParams, x):
    """Value of ``P_n^(alpha, beta)(x)`` in the classical normalisation.

    Parameters
    ----------
    jp : JacobiParams
    x : float or array_like

    Returns
    -------
    float or ndarray
        May overflow to ``inf`` for extreme parameters; use
        :func:`jacobi_log_abs` there.
    """
    pn, _, logs = _recurrence(jp.n, jp.alpha, jp.beta, x)
    with np.errstate(over="ignore"):
        out = pn * np.exp(logs)
    return out if np.ndim(x) else float(out)


def jacobi_log_abs(jp: JacobiParams, x):
    """``(log|P_n(x)|, sign P_n(x))`` without overflow."""
    pn, _, logs = _recurrence(jp.n, jp.alpha, jp.beta, x)
    with np.errstate(divide="ignore"):
        return np.log(np.abs(pn)) + logs, np.sign(pn)


def _newton_ratio(n, a, b, x):
    # P_n / P_n' via the derivative identity
    # (2n+a+b)(1-x^2) P_n' = n[(a-b) - (2n+a+b)x] P_n + 2(n+a)(n+b) P_{n-1}
    pn, pm, _ = _recurrence(n, a, b, x)
    s = 2 * n + a + b
    dp = (n * ((a - b) - s * x) * pn + 2.0 * (n + a) * (n + b) * pm) / (s * (1.0 - x * x))
    return pn, dp


def jacobi_matrix(jp: JacobiParams):
    """Diagonal and off-diagonal of the symmetric Jacobi matrix."""
    n, a, b = jp.n, jp.alpha, jp.beta
    k = np.arange(n, dtype=float)
    s = 2.0 * k + a + b
    diag = np.empty(n)
    diag[0] = (b - a) / (a + b + 2.0)
    if n > 1:
        diag[1:] = (b * b - a * a) / (s[1:] * (s[1:] + 2.0))
    off = np.empty(max(n - 1, 0))
    if n > 1:
        off[0] = 4.0 * (1 + a) * (1 + b) / ((2 + a + b) ** 2 * (3 + a + b))
        kk = k[2:]
        ss = s[2:]
        off[1:] = (4.0 * kk * (kk + a) * (kk + b) * (kk + a + b)
                   / (ss * ss * (ss + 1.0) * (ss - 1.0)))
        off = np.sqrt(off)
    return diag, off


def jacobi_zeros(jp: JacobiParams, polish_iter=5):
    """Ordered zeros of ``P_n^(alpha, beta)``.

    Eigenvalues of the Jacobi matrix, then at most ``polish_iter`` Newton
    steps kept inside the bracket formed by neighbouring midpoints (a
    bisection step replaces any Newton step that leaves it).

    Returns
    -------
    ndarray
        Strictly increasing zeros in ``(-1, 1)``.
    """
    n, a, b = jp.n, jp.alpha, jp.beta
    if n < 1:
        raise DomainError("jacobi_zeros needs n >= 1")
    if n == 1:
        return np.array([(b - a) / (a + b + 2.0)])
    diag, off = jacobi_matrix(jp)
    z = eigh_tridiagonal(diag, off, eigvals_only=True)
    z = np.sort(np.clip(z, -1.0 + 1e-300, 1.0 - 1e-300))
    mid = 0.5 * (z[1:] + z[:-1])
    lo = np.concatenate(([-1.0], mid))
    hi = np.concatenate((mid, [1.0]))
    slo = np.sign(_recurrence(n, a, b, lo)[0])
    for _ in range(polish_iter):
        pn, dp = _newton_ratio(n, a, b, z)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(dp != 0, pn / dp, 0.0)
        znew = z - step
        sz = np.sign(pn)
        # shrink brackets with the sign at the current iterate
        same = sz == slo
        lo = np.where(same & (z > lo), z, lo)
        hi = np.where(~same & (z < hi) & (sz != 0), z, hi)
        bad = ~((znew >= lo) & (znew <= hi)) | ~np.isfinite(znew)
        znew = np.where(bad, 0.5 * (lo + hi), znew)
        done = np.all(np.abs(znew - z) <= 4 * np.finfo(float).eps * np.maximum(1, np.abs(z)))
        z = znew
        if done:
            break
    z = np.sort(z)
    if np.any(np.diff(z) <= 0):
        raise DomainError("zeros failed to separate; parameters too extreme")
    return z
