"""Free cumulants, free convolution and measure expressions on moments.

Everything works on truncated moment vectors. The moment-cumulant
relation used is

    m_n = sum_{k=1}^{n} kappa_k [z^{n-k}] M(z)^k,   M(z) = sum_j m_j z^j,

which is the coefficient form of ``G(R(z) + 1/z) = z``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from .errors import ConfigError, DomainError
from .model import Regime
from .moments import MomentVector


def _powers(m, K, deg):
    """Truncated powers ``M^1..M^K`` up to degree ``deg``; row k is ``M^k``."""
    M = np.zeros(deg + 1)
    M[:min(len(m), deg + 1)] = m[:deg + 1]
    P = np.zeros((K + 1, deg + 1))
    P[0, 0] = 1.0
    for k in range(1, K + 1):
        P[k] = np.convolve(P[k - 1], M)[:deg + 1]
    return P


def moments_to_cumulants(m):
    """Free cumulants from raw moments.

    Parameters
    ----------
    m : MomentVector or array_like
        ``m_0..m_L`` with ``m_0 = 1``.

    Returns
    -------
    ndarray
        ``kappa`` of length ``L+1``; ``kappa[n]`` is the n-th free cumulant
        and ``kappa[0] = 0``.
    """
    m = m.values if isinstance(m, MomentVector) else np.asarray(m, dtype=float)
    if abs(m[0] - 1.0) > 1e-12:
        raise DomainError("m_0 must be 1")
    L = m.size - 1
    P = _powers(m, L, L)
    k = np.zeros(L + 1)
    for n in range(1, L + 1):
        k[n] = m[n] - sum(k[j] * P[j, n - j] for j in range(1, n))
    return k


def cumulants_to_moments(kappa, support="real", provenance="") -> MomentVector:
    """Inverse of :func:`moments_to_cumulants` (``kappa[0]`` is ignored)."""
    kappa = np.asarray(kappa, dtype=float)
    L = kappa.size - 1
    m = np.zeros(L + 1)
    m[0] = 1.0
    # P[k] holds M^k truncated; coefficients of degree d only use m_0..m_d
    P = np.zeros((L + 1, L + 1))
    P[:, 0] = 1.0
    for n in range(1, L + 1):
        m[n] = sum(kappa[j] * P[j, n - j] for j in range(1, n + 1))
        # refresh degree-n coefficients of every power now that m_n is known
        for k in range(1, L + 1):
            P[k, n] = float(np.dot(P[k - 1, :n + 1], m[n::-1]))
    return MomentVector(m, support, provenance)


def free_add(*mus, support=None) -> MomentVector:
    """Free additive convolution: cumulants add."""
    if not mus:
        raise DomainError("free_add needs at least one measure")
    L = min(mu.L for mu in mus)
    k = sum(moments_to_cumulants(mu.truncate(L)) for mu in mus)
    if support is None:
        support = "symmetric" if all(mu.support == "symmetric" for mu in mus) else "real"
    return cumulants_to_moments(k, support, "free_add")


def scale_measure(mu: MomentVector, v) -> MomentVector:
    """Push-forward under ``x -> v x``; ``m_l -> v^l m_l``.

    ``v = 0`` collapses to ``delta_0``. A negative factor turns a
    nonnegative law into a ``real`` one.
    """
    v = float(v)
    if not math.isfinite(v):
        raise DomainError("scale factor must be finite")
    vals = mu.values * v ** np.arange(mu.L + 1)
    vals[0] = 1.0
    support = mu.support
    if v < 0 and support == "nonnegative":
        support = "real"
    return MomentVector(vals, support, "scale")


def even_sqrt(mu: MomentVector, L=None) -> MomentVector:
    """Symmetric law whose square is ``mu``: ``m'_{2k} = m_k``, odd = 0.

    ``mu`` must carry nonnegative support. The result has order
    ``2 mu.L`` unless a smaller ``L`` is requested.
    """
    if mu.support != "nonnegative":
        raise DomainError("even_sqrt needs a law on [0, inf)")
    L = 2 * mu.L if L is None else int(L)
    if L > 2 * mu.L:
        raise DomainError(f"even_sqrt of order {L} needs mu up to {math.ceil(L / 2)}")
    out = np.zeros(L + 1)
    out[0::2] = mu.values[:L // 2 + 1]
    return MomentVector(out, "symmetric", "even_sqrt")


def square_measure(mu: MomentVector, L=None, tol=1e-9) -> MomentVector:
    """Push-forward under ``x -> x^2``: ``m'_k = m_{2k}``.

    ``mu`` must be symmetric: every odd moment has to stay below ``tol``
    relative to ``max(1, sqrt(m_2)^l)``.
    """
    L = mu.L // 2 if L is None else int(L)
    if 2 * L > mu.L:
        raise DomainError(f"square of order {L} needs mu up to {2 * L}")
    sig = math.sqrt(max(mu.values[2], 0.0)) if mu.L >= 2 else 1.0
    for l in range(1, mu.L + 1, 2):
        if abs(mu.values[l]) > tol * max(1.0, sig ** l):
            raise DomainError(f"square needs a symmetric law; m_{l} = {mu.values[l]:.3g}")
    return MomentVector(mu.values[0:2 * L + 1:2], "nonnegative", "square")


def catalan(k):
    return math.comb(2 * k, k) // (k + 1)


def semicircle_moments(radius, L) -> MomentVector:
    """Semicircle of radius ``lambda``: ``m_{2k} = Cat_k (lambda/2)^{2k}``."""
    if radius < 0:
        raise DomainError("radius must be nonnegative")
    out = np.zeros(L + 1)
    for k in range(L // 2 + 1):
        out[2 * k] = catalan(k) * (radius / 2.0) ** (2 * k)
    return MomentVector(out, "symmetric", f"semicircle({radius!r})")


def mp_moments(c, t, L) -> MomentVector:
    """Marchenko-Pastur law with free cumulants ``kappa_n = c t^n``.

    ``c < 0`` is allowed and gives the signed cumulant sequence that shows
    up inside free sums; the support tag is then ``real``.
    """
    if t < 0:
        raise DomainError("MP scale t must be nonnegative")
    k = c * float(t) ** np.arange(L + 1)
    k[0] = 0.0
    return cumulants_to_moments(k, "nonnegative" if c >= 0 else "real", f"mp({c!r},{t!r})")


def dirac_moments(loc, L) -> MomentVector:
    vals = float(loc) ** np.arange(L + 1)
    # delta_0 is tagged nonnegative so it can enter even_sqrt
    sup = "nonnegative" if loc >= 0 else "real"
    return MomentVector(vals, sup, f"dirac({loc!r})")


# -------------------------------------------------------- expressions


@dataclass(frozen=True)
class Semicircle:
    radius: float


@dataclass(frozen=True)
class MarchenkoPastur:
    c: float
    t: float


@dataclass(frozen=True)
class Dirac:
    loc: float


@dataclass(frozen=True)
class EmpiricalMoments:
    """A law given only through its moments."""

    values: Tuple[float, ...]
    support: str = "real"

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))


@dataclass(frozen=True)
class Scale:
    factor: float
    child: object


@dataclass(frozen=True)
class FreeAdd:
    children: Tuple[object, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))


@dataclass(frozen=True)
class EvenSqrt:
    child: object


@dataclass(frozen=True)
class Square:
    child: object


_NODES = {cls.__name__: cls for cls in
          (Semicircle, MarchenkoPastur, Dirac, EmpiricalMoments, Scale, FreeAdd, EvenSqrt, Square)}


def from_moment_vector(mu: MomentVector) -> EmpiricalMoments:
    return EmpiricalMoments(tuple(mu.values), mu.support)


def available_order(expr):
    """Largest moment order an expression can supply (``inf`` if unbounded)."""
    if isinstance(expr, MomentVector):
        return expr.L
    if isinstance(expr, EmpiricalMoments):
        return len(expr.values) - 1
    if isinstance(expr, Scale):
        return available_order(expr.child)
    if isinstance(expr, FreeAdd):
        return min((available_order(c) for c in expr.children), default=math.inf)
    if isinstance(expr, EvenSqrt):
        return 2 * available_order(expr.child) + 1
    if isinstance(expr, Square):
        return available_order(expr.child) // 2
    return math.inf


def evaluate(expr, L) -> MomentVector:
    """Moments ``m_0..m_L`` of a measure expression."""
    if isinstance(expr, MomentVector):
        return expr.truncate(L)
    if isinstance(expr, Semicircle):
        return semicircle_moments(expr.radius, L)
    if isinstance(expr, MarchenkoPastur):
        return mp_moments(expr.c, expr.t, L)
    if isinstance(expr, Dirac):
        return dirac_moments(expr.loc, L)
    if isinstance(expr, EmpiricalMoments):
        if len(expr.values) < L + 1:
            raise DomainError(f"moment data of order {len(expr.values) - 1} < {L}")
        return MomentVector(expr.values[:L + 1], expr.support, "empirical")
    if isinstance(expr, Scale):
        return scale_measure(evaluate(expr.child, L), expr.factor)
    if isinstance(expr, FreeAdd):
        return free_add(*(evaluate(c, L) for c in expr.children))
    if isinstance(expr, EvenSqrt):
        return even_sqrt(evaluate(expr.child, (L + 1) // 2), L)
    if isinstance(expr, Square):
        return square_measure(evaluate(expr.child, 2 * L), L)
    raise ConfigError(f"not a measure expression: {expr!r}")


def expr_to_json(expr):
    if isinstance(expr, MomentVector):
        expr = from_moment_vector(expr)
    name = type(expr).__name__
    if name not in _NODES:
        raise ConfigError(f"not a measure expression: {expr!r}")
    out = {"type": name}
    if isinstance(expr, (Scale, EvenSqrt, Square)):
        out["child"] = expr_to_json(expr.child)
        if isinstance(expr, Scale):
            out["factor"] = expr.factor
    elif isinstance(expr, FreeAdd):
        out["children"] = [expr_to_json(c) for c in expr.children]
    elif isinstance(expr, EmpiricalMoments):
        out["values"] = list(expr.values)
        out["support"] = expr.support
    else:
        out.update({k: getattr(expr, k) for k in expr.__dataclass_fields__})
    return out


def expr_from_json(data):
    """Parse a measure expression from its JSON form (strict keys)."""
    if not isinstance(data, dict) or "type" not in data:
        raise ConfigError(f"measure expression must be an object with 'type': {data!r}")
    name = data["type"]
    if name not in _NODES:
        raise ConfigError(f"unknown measure type {name!r}")
    cls = _NODES[name]
    fields = set(cls.__dataclass_fields__)
    extra = set(data) - fields - {"type"}
    if extra:
        raise ConfigError(f"unknown keys for {name}: {sorted(extra)}")
    kw = {k: v for k, v in data.items() if k != "type"}
    try:
        if cls in (Scale, EvenSqrt, Square):
            kw["child"] = expr_from_json(kw["child"])
        elif cls is FreeAdd:
            kw["children"] = tuple(expr_from_json(c) for c in kw["children"])
        return cls(**kw)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"bad {name} expression: {exc}") from None


def dumps_expr(expr):
    return json.dumps(expr_to_json(expr), sort_keys=True)


# --------------------------------------------------------- predictions


def limit_expression(regime, t, mu0, constants):
    """Measure expression of the limit law at rescaled time ``t``."""
    regime = Regime.parse(regime)
    if t < 0:
        raise DomainError("t must be nonnegative")
    mu = from_moment_vector(mu0) if isinstance(mu0, MomentVector) else mu0

    def need(name):
        if constants.get(name) is None:
            raise DomainError(f"regime {regime.value} needs constant {name}")
        return float(constants[name])

    if regime is Regime.WignerStationary:
        C = need("C")
        lam = 0.0 if math.isinf(C) else 4.0 * (1.0 + C) ** -1.5
        return FreeAdd((Scale(math.exp(-t), mu),
                        Scale(math.sqrt(-math.expm1(-2 * t)), Semicircle(lam))))
    if regime is Regime.WignerDegenerate:
        return Scale(math.exp(-t), mu)
    if regime in (Regime.WignerLocal, Regime.WignerLocalDrift, Regime.NCWignerLocal):
        B = need("B")
        w = (1.0 - B * B) if regime is not Regime.NCWignerLocal else (B * B - 1.0)
        if w < 0:
            raise DomainError("semicircle variance must be nonnegative")
        parts = [mu, Semicircle(2.0 * math.sqrt(2.0 * w * t))]
        if regime is Regime.WignerLocalDrift:
            parts.append(Dirac(need("c") * t))
        return FreeAdd(tuple(parts))
    if regime in (Regime.MPStationary, Regime.MPLocal, Regime.NCMPTimeInverted, Regime.NCMPLocal):
        hat = need("p_hat" if regime in (Regime.MPStationary, Regime.MPLocal) else "q_hat")
        if regime is Regime.MPStationary:
            u, start = -math.expm1(-t), Scale(math.exp(-t), mu)
        elif regime is Regime.NCMPTimeInverted:
            u, start = math.expm1(t), Scale(math.exp(t), mu)
        else:
            u, start = t, mu
        return FreeAdd((Square(FreeAdd((Semicircle(2.0 * math.sqrt(2.0 * u)), EvenSqrt(start)))),
                        MarchenkoPastur(hat - 1.0, 2.0 * u)))
    raise NotImplementedError(f"regime {regime.value} not implemented")


def predict_limit(regime, t, mu0, constants, L=None) -> MomentVector:
    """Limit moments from the free-probability description of a regime.

    ``mu0`` must carry nonnegative support in the MP regimes.
    """
    if L is None:
        if not isinstance(mu0, MomentVector):
            raise DomainError("L is required when mu0 is an expression")
        L = mu0.L
    expr = limit_expression(regime, t, mu0, constants)
    out = evaluate(expr, L)
    return MomentVector(out.values, out.support, f"predict_limit:{Regime.parse(regime).value}")
