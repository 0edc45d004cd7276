"""Exponential-polynomial sums ``sum_j c_j t^{d_j} exp(r_j t)``.

Closed under addition, multiplication and the variation-of-constants map
``y' = lam*y + f``. Two rates closer than ``RATE_TOL*(1+|r|)`` are treated
as equal, which turns resonant integrals into a power bump instead of a
division by (almost) zero.
"""

from __future__ import annotations

import math
from numbers import Real

import numpy as np

RATE_TOL = 1e-9


def _same_rate(r1, r2):
    return abs(r1 - r2) < RATE_TOL * (1.0 + max(abs(r1), abs(r2)))


class ExpPolySum:
    """Immutable exponential-polynomial sum.

    Parameters
    ----------
    terms : iterable of (coef, power, rate)
        Terms are merged when ``power`` agrees and the rates coincide up to
        tolerance; exact zero coefficients are pruned.
    """

    __slots__ = ("_terms",)

    def __init__(self, terms=()):
        merged = []  # list of [coef, power, rate]
        for c, d, r in terms:
            c = float(c)
            d = int(d)
            r = float(r)
            if d < 0:
                raise ValueError("powers must be nonnegative")
            for m in merged:
                if m[1] == d and _same_rate(m[2], r):
                    m[0] += c
                    break
            else:
                merged.append([c, d, r])
        merged = [tuple(m) for m in merged if m[0] != 0.0]
        merged.sort(key=lambda m: (m[2], m[1]))
        self._terms = tuple(merged)

    # construction helpers
    @classmethod
    def constant(cls, c):
        return cls([(c, 0, 0.0)])

    @classmethod
    def exp(cls, rate, c=1.0):
        return cls([(c, 0, rate)])

    @property
    def terms(self):
        return self._terms

    @property
    def rates(self):
        return sorted({r for _, _, r in self._terms})

    def __len__(self):
        return len(self._terms)

    def __repr__(self):
        body = " + ".join(f"{c:.6g}*t^{d}*exp({r:.6g}t)" for c, d, r in self._terms)
        return f"ExpPolySum({body or '0'})"

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for c, d, r in self._terms:
            term = np.exp(r * t) * c
            if d:
                term = term * t ** d
            out = out + term
        return out if out.ndim else float(out)

    def at_zero(self):
        return sum(c for c, d, _ in self._terms if d == 0)

    # algebra
    def __add__(self, other):
        if isinstance(other, Real):
            other = ExpPolySum.constant(other)
        if not isinstance(other, ExpPolySum):
            return NotImplemented
        return ExpPolySum(self._terms + other._terms)

    __radd__ = __add__

    def __neg__(self):
        return ExpPolySum((-c, d, r) for c, d, r in self._terms)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Real):
            return ExpPolySum((c * other, d, r) for c, d, r in self._terms)
        if not isinstance(other, ExpPolySum):
            return NotImplemented
        return ExpPolySum(
            (c1 * c2, d1 + d2, r1 + r2)
            for c1, d1, r1 in self._terms
            for c2, d2, r2 in other._terms
        )

    __rmul__ = __mul__

    def derivative(self):
        out = []
        for c, d, r in self._terms:
            if r != 0.0:
                out.append((c * r, d, r))
            if d:
                out.append((c * d, d - 1, r))
        return ExpPolySum(out)

    def solve_linear(self, lam, y0):
        """Solution of ``y' = lam*y + self`` with ``y(0) = y0``."""
        lam = float(lam)
        out = [(y0, 0, lam)]
        for c, d, r in self._terms:
            if _same_rate(r, lam):
                out.append((c / (d + 1), d + 1, lam))
                continue
            mu = r - lam
            fact = math.factorial(d)
            for j in range(d + 1):
                coef = c * (-1) ** j * (fact / math.factorial(d - j)) / mu ** (j + 1)
                out.append((coef, d - j, r))
            out.append((-c * (-1) ** d * fact / mu ** (d + 1), 0, lam))
        return ExpPolySum(out)

    def integral(self):
        """``int_0^t self(s) ds`` as a new sum."""
        return self.solve_linear(0.0, 0.0)

    def to_json(self):
        return [[c, d, r] for c, d, r in self._terms]

    @classmethod
    def from_json(cls, data):
        return cls((c, d, r) for c, d, r in data)

    def __eq__(self, other):
        return isinstance(other, ExpPolySum) and self._terms == other._terms

    def __hash__(self):
        return hash(self._terms)
