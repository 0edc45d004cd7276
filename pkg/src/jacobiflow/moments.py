"""Empirical moments, the finite-N moment system and the limit recursions.

Public times are rescaled times: for a time scale ``s`` the raw clock
runs ``t/s``. The finite-N system below is exact for the frozen flow;
the limit recursions are its ``N -> inf`` forms, one per regime.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .expsum import ExpPolySum
from .model import Domain, ParticleState, Regime, ScalingRegime

SUPPORT_TAGS = ("real", "nonnegative", "symmetric")


@dataclass(frozen=True)
class MomentVector:
    """Raw moments ``m_0..m_L`` with a support tag.

    ``support`` is ``"real"``, ``"nonnegative"`` or ``"symmetric"``.
    """

    values: np.ndarray
    support: str = "real"
    provenance: str = ""

    def __post_init__(self):
        v = np.array(self.values, dtype=float).ravel()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if v.size == 0:
            raise DomainError("empty moment vector")
        if abs(v[0] - 1.0) > 1e-12:
            raise DomainError(f"m_0 must be 1, got {v[0]!r}")
        if self.support not in SUPPORT_TAGS:
            raise DomainError(f"unknown support tag {self.support!r}")
        if self.support == "nonnegative" and v.size > 2:
            if v[2] < v[1] ** 2 - 1e-12 * max(1.0, v[1] ** 2):
                raise DomainError("m_2 < m_1^2 for a nonnegative-support law")

    @property
    def L(self) -> int:
        return self.values.size - 1

    def __getitem__(self, i):
        return self.values[i]

    def __len__(self):
        return self.values.size

    def truncate(self, L) -> "MomentVector":
        if L > self.L:
            raise DomainError(f"need order {L}, have {self.L}")
        return MomentVector(self.values[:L + 1], self.support, self.provenance)

    def to_json(self):
        return {"L": self.L, "support": self.support, "provenance": self.provenance,
                "values": [float(v) for v in self.values]}

    @classmethod
    def from_json(cls, data):
        return cls(np.asarray(data["values"], dtype=float), data.get("support", "real"),
                   data.get("provenance", ""))

    def dumps(self):
        return json.dumps(self.to_json())


def empirical_moments(x, a, b, L) -> MomentVector:
    """``m_l = (1/N) sum_i (a (x_i - b))^l`` for ``l = 0..L``."""
    if not a > 0:
        raise DomainError("space scale a must be positive")
    c = x.coords if isinstance(x, ParticleState) else np.asarray(x, dtype=float)
    y = a * (c - b)
    out = np.empty(L + 1)
    pw = np.ones_like(y)
    for l in range(L + 1):
        out[l] = float(np.mean(pw))
        pw = pw * y
    return MomentVector(out, provenance="empirical")


def empirical_moments_batch(X, a, b, L):
    """Moments of each row of ``X``, shape ``(R, L+1)``."""
    Y = a * (np.asarray(X, dtype=float) - b)
    out = np.empty(Y.shape[:-1] + (L + 1,))
    pw = np.ones_like(Y)
    for l in range(L + 1):
        out[..., l] = pw.mean(axis=-1)
        pw = pw * Y
    return out


# ------------------------------------------------------ finite-N system


def moment_rhs(S, p, q, a, b, N, domain=Domain.CompactAlcove, s=1.0):
    """Right-hand side of the closed finite-N moment system.

    ``S`` holds ``S_0..S_L``; the returned derivative (with respect to the
    rescaled clock ``t = s * raw``) has ``dS_0/dt = 0``. For ``l >= 2``::

        dS_l = l[(p-q-b(p+q-2(l-1))) a S_{l-1} - (p+q-(l-1)) S_l
                 - a^2 (1-b^2)(l-1) S_{l-2} + N a^2 (1-b^2) sum_k S_k S_{l-2-k}
                 - N sum_k S_{k+1} S_{l-1-k} - 2abN sum_k S_k S_{l-1-k}]

    with sums over ``k = 0..l-2``, and
    ``dS_1 = -(p+q) S_1 + a (p-q-b(p+q))``. The noncompact system is the
    negative.
    """
    S = np.asarray(S, dtype=float)
    L = S.size - 1
    d = np.zeros_like(S)
    w = a * a * (1.0 - b * b)
    if L >= 1:
        d[1] = -(p + q) * S[1] + a * (p - q - b * (p + q))
    for l in range(2, L + 1):
        s2 = float(np.dot(S[0:l - 1], S[l - 2::-1]))
        s1p = float(np.dot(S[1:l], S[l - 1:0:-1]))
        s1 = float(np.dot(S[0:l - 1], S[l - 1:0:-1]))
        d[l] = l * ((p - q - b * (p + q - 2 * (l - 1))) * a * S[l - 1]
                    - (p + q - (l - 1)) * S[l]
                    - w * (l - 1) * S[l - 2]
                    + N * w * s2
                    - N * s1p
                    - 2.0 * a * b * N * s1)
    return Domain.parse(domain).sign * d / s


def _rk4(f, y, t0, t1, n):
    h = (t1 - t0) / n
    for _ in range(n):
        k1 = f(y)
        k2 = f(y + 0.5 * h * k1)
        k3 = f(y + 0.5 * h * k2)
        k4 = f(y + h * k3)
        y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return y


# substeps are sized for at least this order so that truncating L <= 10
# reproduces the lower orders bit for bit
_REF_ORDER = 10


def _stiffness(p, q, L, s):
    # the system is lower triangular with diagonal -l(p+q-l+1)/s
    l = np.arange(1, L + 1)
    return float(np.max(np.abs(l * (p + q - l + 1.0)))) / s + 1.0


def moment_ode_oracle(S0, p, q, a, b, N, t_grid, domain=Domain.CompactAlcove, s=1.0,
                      courant=0.02):
    """Integrate the finite-N moment system on a time grid with RK4.

    Each grid interval is split into equal substeps so that the step
    times the largest diagonal rate stays below ``courant``. The rate is
    taken over orders up to ``max(L, 10)``, so truncating ``S0`` to any
    ``L <= 10`` leaves the lower orders unchanged.

    Parameters
    ----------
    S0 : MomentVector or array_like
        Initial moments ``S_0..S_L`` with ``S_0 = 1``.
    t_grid : array_like
        Nondecreasing times on the clock rescaled by ``s``, starting at or
        after 0.

    Returns
    -------
    list of MomentVector
    """
    vals = S0.values if isinstance(S0, MomentVector) else np.asarray(S0, dtype=float)
    if vals.size < 3:
        raise DomainError("moment oracle needs L >= 2")
    if abs(vals[0] - 1.0) > 1e-12:
        raise DomainError("S_0 must be 1")
    grid = np.asarray(t_grid, dtype=float)
    L = vals.size - 1
    domain = Domain.parse(domain)
    if domain is Domain.CompactAlcove and L >= p + q + 1:
        # the order-l rate -l(p+q-l+1)/s is >= 0 here, so rounding errors grow
        warnings.warn(
            f"orders l >= p+q+1 = {p + q + 1:.3g} are unstable in the moment system; "
            f"errors at order {L} grow like exp({L * (L - 1 - p - q) / s:.3g} t)",
            RuntimeWarning, stacklevel=2)

    def f(S):
        return moment_rhs(S, p, q, a, b, N, domain, s)

    y = vals.copy()
    t = 0.0
    out = []
    for tg in grid:
        if tg < t:
            raise DomainError("time grid must be nondecreasing and >= 0")
        if tg > t:
            rho = _stiffness(p, q, max(y.size - 1, _REF_ORDER), s)
            n = max(1, int(math.ceil((tg - t) * rho / courant)))
            y = _rk4(f, y, t, tg, n)
            t = tg
        out.append(MomentVector(y.copy(), provenance="moment_ode_oracle"))
    return out


# ---------------------------------------------------- limit recursions


@dataclass(frozen=True)
class RegimeLimitSpec:
    """Input of :func:`limit_recursion`.

    ``constants`` maps the regime's limit constants (``C``, ``p_hat``,
    ``q_hat``, ``B``, ``c``) to numbers; ``gamma`` is the constant of the
    moment growth bound checked on ``mu0``.
    """

    regime: Regime
    t: float
    mu0: MomentVector
    constants: dict = field(default_factory=dict)
    gamma: float = 10.0

    def __post_init__(self):
        reg = self.regime.regime if isinstance(self.regime, ScalingRegime) else self.regime
        object.__setattr__(self, "regime", Regime.parse(reg))
        if not self.t >= 0:
            raise DomainError("t must be nonnegative")


def recursion_coefficients(regime, constants):
    """Coefficient functions of the limit recursion.

    Every implemented regime has the form
    ``dS_l = al(l) S_l + be(l) S_{l-1} + ga(l) sum_{k<=l-2} S_k S_{l-2-k}
    + de(l) sum_{k<=l-2} S_k S_{l-1-k}``.
    """
    regime = Regime.parse(regime)

    def need(name):
        if name not in constants or constants[name] is None:
            raise DomainError(f"regime {regime.value} needs constant {name}")
        return float(constants[name])

    zero = lambda l: 0.0  # noqa: E731
    if regime is Regime.WignerStationary:
        C = need("C")
        g = 0.0 if math.isinf(C) else 4.0 * (1.0 + C) ** -3
        return (lambda l: -float(l)), zero, (lambda l: g * l), zero
    if regime is Regime.WignerDegenerate:
        return (lambda l: -float(l)), zero, zero, zero
    if regime is Regime.WignerLocal:
        B = need("B")
        return zero, zero, (lambda l: l * (1.0 - B * B)), zero
    if regime is Regime.WignerLocalDrift:
        B = need("B")
        c = need("c")
        return zero, (lambda l: l * c), (lambda l: l * (1.0 - B * B)), zero
    if regime is Regime.NCWignerLocal:
        B = need("B")
        return zero, zero, (lambda l: l * (B * B - 1.0)), zero
    if regime in (Regime.MPStationary, Regime.MPLocal):
        ph = need("p_hat")
        al = (lambda l: -float(l)) if regime is Regime.MPStationary else zero
        return al, (lambda l: 2.0 * l * ph), zero, (lambda l: 2.0 * l)
    if regime in (Regime.NCMPTimeInverted, Regime.NCMPLocal):
        qh = need("q_hat")
        al = (lambda l: float(l)) if regime is Regime.NCMPTimeInverted else zero
        return al, (lambda l: 2.0 * l * qh), zero, (lambda l: 2.0 * l)
    raise NotImplementedError(f"regime {regime.value} not implemented")


def limit_trajectories(regime, constants, mu0, L):
    """Exact ``S_0..S_L`` as exponential-polynomial sums of ``t``."""
    al, be, ga, de = recursion_coefficients(regime, constants)
    m = mu0.values if isinstance(mu0, MomentVector) else np.asarray(mu0, dtype=float)
    if m.size < L + 1:
        raise DomainError(f"mu0 has order {m.size - 1} < {L}")
    S = [ExpPolySum.constant(1.0)]
    for l in range(1, L + 1):
        forcing = ExpPolySum()
        if be(l):
            forcing = forcing + S[l - 1] * be(l)
        if ga(l) and l >= 2:
            acc = ExpPolySum()
            for k in range(l - 1):
                acc = acc + S[k] * S[l - 2 - k]
            forcing = forcing + acc * ga(l)
        if de(l) and l >= 2:
            acc = ExpPolySum()
            for k in range(l - 1):
                acc = acc + S[k] * S[l - 1 - k]
            forcing = forcing + acc * de(l)
        S.append(forcing.solve_linear(al(l), float(m[l])))
    return S


def _limit_rhs(S, al, be, ga, de):
    L = S.size - 1
    d = np.zeros_like(S)
    for l in range(1, L + 1):
        v = al(l) * S[l] + be(l) * S[l - 1]
        if l >= 2:
            v += ga(l) * float(np.dot(S[0:l - 1], S[l - 2::-1]))
            v += de(l) * float(np.dot(S[0:l - 1], S[l - 1:0:-1]))
        d[l] = v
    return d


def growth_bound_check(mu, gamma) -> bool:
    """True iff ``|m_l| <= (gamma l)^l`` for ``1 <= l <= L``."""
    if not gamma > 0:
        raise DomainError("gamma must be positive")
    m = mu.values if isinstance(mu, MomentVector) else np.asarray(mu, dtype=float)
    for l in range(1, m.size):
        if abs(m[l]) > (gamma * l) ** l:
            return False
    return True


def limit_recursion(spec: RegimeLimitSpec, L=None, method="exact", dt=1e-3) -> MomentVector:
    """Limit moments ``S_0(t)..S_L(t)`` of a regime.

    Parameters
    ----------
    spec : RegimeLimitSpec
    L : int, optional
        Defaults to the order of ``spec.mu0``.
    method : {"exact", "rk4"}
        ``exact`` solves the triangular recursion in closed form with
        exponential-polynomial sums; ``rk4`` integrates it with fixed step
        ``dt``.
    """
    L = spec.mu0.L if L is None else int(L)
    mu = spec.mu0.truncate(L)
    if not growth_bound_check(mu, spec.gamma):
        raise DomainError(f"initial law violates |c_l| <= ({spec.gamma} l)^l")
    if method == "exact":
        S = limit_trajectories(spec.regime, spec.constants, mu, L)
        vals = np.array([s(spec.t) for s in S])
    elif method == "rk4":
        coeffs = recursion_coefficients(spec.regime, spec.constants)
        n = max(1, int(math.ceil(spec.t / dt)))
        vals = _rk4(lambda S: _limit_rhs(S, *coeffs), mu.values.copy(), 0.0, spec.t, n) \
            if spec.t > 0 else mu.values.copy()
    else:
        raise DomainError(f"unknown method {method!r}")
    vals[0] = 1.0
    return MomentVector(vals, provenance=f"limit_recursion:{spec.regime.value}")
