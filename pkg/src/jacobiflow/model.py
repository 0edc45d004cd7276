"""Domains, parameters, drift fields and scaling regimes.

Coordinates are algebraic: the compact system lives on the alcove
``-1 <= x_1 <= ... <= x_N <= 1`` and the noncompact one on the chamber
``1 <= x_1 <= ... <= x_N``.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConstraintError, DomainError, SingularConfigurationError

DEFAULT_GAP_TOL = 1e-12


class Domain(enum.Enum):
    CompactAlcove = "compact"
    NoncompactChamber = "noncompact"

    @property
    def sign(self) -> float:
        """+1 for the compact drift, -1 for the noncompact one."""
        return 1.0 if self is Domain.CompactAlcove else -1.0

    @classmethod
    def parse(cls, value) -> "Domain":
        if isinstance(value, Domain):
            return value
        for d in cls:
            if value in (d.value, d.name):
                return d
        raise DomainError(f"unknown domain {value!r}")

    def contains(self, x, tol=0.0) -> bool:
        x = np.asarray(x, dtype=float)
        if x.size == 0:
            return True
        if np.any(np.diff(x) < -tol):
            return False
        if self is Domain.CompactAlcove:
            return bool(x[0] >= -1.0 - tol and x[-1] <= 1.0 + tol)
        return bool(x[0] >= 1.0 - tol)

    def is_interior(self, x, gap_tol=DEFAULT_GAP_TOL) -> bool:
        x = np.asarray(x, dtype=float)
        if x.size == 0:
            return True
        if x.size > 1 and np.min(np.diff(x)) <= gap_tol:
            return False
        if self is Domain.CompactAlcove:
            return bool(x[0] > -1.0 and x[-1] < 1.0)
        return bool(x[0] > 1.0)


@dataclass(frozen=True)
class ParticleState:
    """Sorted particle positions on a domain.

    The coordinate array is copied and made read-only.
    """

    domain: Domain
    coords: np.ndarray

    def __post_init__(self):
        c = np.array(self.coords, dtype=float).ravel()
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)
        object.__setattr__(self, "domain", Domain.parse(self.domain))
        if not np.all(np.isfinite(c)):
            raise DomainError("non-finite coordinates")
        if not self.domain.contains(c):
            raise DomainError(
                f"coordinates not sorted inside the closed {self.domain.value} domain"
            )

    @property
    def N(self) -> int:
        return self.coords.size

    def is_interior(self, gap_tol=DEFAULT_GAP_TOL) -> bool:
        return self.domain.is_interior(self.coords, gap_tol)


@dataclass(frozen=True)
class ModelParams:
    """Multiplicity data in the ``(kappa, p, q)`` form.

    ``kappa`` only matters for stochastic dynamics; the frozen limit is a
    flag of the integrator and never a stored value.
    """

    p: float
    q: float
    N: int
    kappa: float = 1.0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ConstraintError("N >= 1 integer", f"N={self.N}")
        object.__setattr__(self, "N", int(self.N))
        if not self.p > self.N - 1:
            raise ConstraintError("p > N-1", f"p={self.p}, N={self.N}")
        if not self.q > self.N - 1:
            raise ConstraintError("q > N-1", f"q={self.q}, N={self.N}")
        if not (self.kappa > 0 and math.isfinite(self.kappa)):
            raise ConstraintError("kappa > 0", f"kappa={self.kappa}")

    def to_multiplicities(self):
        """Return ``(k1, k2, k3)``."""
        k3 = self.kappa
        k1 = k3 * (self.q - self.p)
        k2 = (2.0 * k3 * (self.p - self.N + 1) - 1.0) / 2.0
        return k1, k2, k3

    def collision_free(self) -> bool:
        """Sufficient condition for the SDE to avoid the boundary."""
        thr = self.N - 1 + 2.0 / self.kappa
        return self.kappa >= 1.0 and self.p >= thr and self.q >= thr

    def swapped(self) -> "ModelParams":
        return ModelParams(p=self.q, q=self.p, N=self.N, kappa=self.kappa)


def params_from_multiplicities(k1, k2, k3, N, *, warn=True) -> ModelParams:
    """Map root-system multiplicities to ``(kappa, p, q)``.

    Parameters
    ----------
    k1, k2 : float
        Multiplicities with ``k2 >= 0`` and ``k1 + k2 >= 0``.
    k3 : float
        Positive multiplicity, becomes ``kappa``.
    N : int
        Number of particles.
    """
    if not k3 > 0:
        raise ConstraintError("k3 > 0", f"k3={k3}")
    if not k2 >= 0:
        raise ConstraintError("k2 >= 0", f"k2={k2}")
    if not k1 + k2 >= 0:
        raise ConstraintError("k1 + k2 >= 0", f"k1+k2={k1 + k2}")
    q = N - 1 + (1.0 + 2.0 * k1 + 2.0 * k2) / (2.0 * k3)
    p = N - 1 + (1.0 + 2.0 * k2) / (2.0 * k3)
    mp = ModelParams(p=p, q=q, N=N, kappa=k3)
    if warn and not mp.collision_free():
        warnings.warn(
            "kappa >= 1 and p, q >= N-1+2/kappa fails; the diffusion may hit the boundary",
            RuntimeWarning,
            stacklevel=2,
        )
    return mp


def _coords(x, domain, check, gap_tol):
    if isinstance(x, ParticleState):
        c = x.coords
    else:
        c = np.asarray(x, dtype=float)
    if check and not domain.is_interior(c, gap_tol):
        raise SingularConfigurationError(
            f"drift undefined: state not strictly inside the {domain.value} domain"
        )
    return c


def drift_compact(x, p, q, *, check=True, gap_tol=DEFAULT_GAP_TOL):
    """Frozen drift on the alcove.

    Component ``i`` is ``(p-q) - (p+q) x_i + 2 sum_{j != i} (1 - x_i x_j)/(x_i - x_j)``.
    """
    c = _coords(x, Domain.CompactAlcove, check, gap_tol)
    return kernels.drift(c, p, q, 1.0)


def drift_noncompact(x, p, q, *, check=True, gap_tol=DEFAULT_GAP_TOL):
    """Frozen drift on the chamber, the negative of the compact formula."""
    c = _coords(x, Domain.NoncompactChamber, check, gap_tol)
    return kernels.drift(c, p, q, -1.0)


def drift(x, p, q, domain, **kw):
    domain = Domain.parse(domain)
    if domain is Domain.CompactAlcove:
        return drift_compact(x, p, q, **kw)
    return drift_noncompact(x, p, q, **kw)


# ---------------------------------------------------------------- regimes


class Regime(enum.Enum):
    WignerStationary = "WignerStationary"
    WignerDegenerate = "WignerDegenerate"
    WignerLocal = "WignerLocal"
    WignerLocalDrift = "WignerLocalDrift"
    MPStationary = "MPStationary"
    MPLocal = "MPLocal"
    NCWignerLocal = "NCWignerLocal"
    NCMPTimeInverted = "NCMPTimeInverted"
    NCMPLocal = "NCMPLocal"

    @classmethod
    def parse(cls, value) -> "Regime":
        if isinstance(value, Regime):
            return value
        try:
            return cls(value)
        except ValueError:
            if str(value) in ("KestenMcKay", "Wachter"):
                raise NotImplementedError(
                    f"regime {value} is out of scope (Kesten-McKay and Wachter limits "
                    "are not implemented)"
                ) from None
            raise NotImplementedError(f"unknown regime {value!r}") from None

    @property
    def domain(self) -> Domain:
        if self.name.startswith("NC"):
            return Domain.NoncompactChamber
        return Domain.CompactAlcove

    @property
    def is_mp(self) -> bool:
        return "MP" in self.name

    @property
    def stationary_clock(self) -> bool:
        """True when the time scale is ``p+q`` rather than a free ``s_N``."""
        return self in (Regime.WignerStationary, Regime.WignerDegenerate,
                        Regime.MPStationary, Regime.NCMPTimeInverted)

    @property
    def local(self) -> bool:
        return not self.stationary_clock

    @property
    def constant_names(self):
        return _CONSTANTS[self]


_CONSTANTS = {
    Regime.WignerStationary: ("C",),
    Regime.WignerDegenerate: (),
    Regime.WignerLocal: ("B",),
    Regime.WignerLocalDrift: ("B", "c"),
    Regime.MPStationary: ("p_hat",),
    Regime.MPLocal: ("p_hat",),
    Regime.NCWignerLocal: ("B",),
    Regime.NCMPTimeInverted: ("q_hat",),
    Regime.NCMPLocal: ("q_hat",),
}


@dataclass(frozen=True)
class RegimeInstance:
    """Scalings of one regime at one ``N``.

    ``p`` and ``q`` are the parameters the dynamics actually run with; they
    differ from the supplied ones when ``mirrored`` (the ``p <-> q`` swap that
    turns ``C = inf`` into ``C = 0``, equivalent to ``x -> -x``).
    """

    regime: Regime
    N: int
    p: float
    q: float
    a: float
    b: float
    s: float
    mirrored: bool
    constants: dict

    @property
    def domain(self) -> Domain:
        return self.regime.domain

    def raw_time(self, t):
        return np.asarray(t, dtype=float) / self.s


@dataclass(frozen=True)
class ScalingRegime:
    """A limit regime with its declared constants.

    Parameters
    ----------
    regime : Regime or str
    constants : dict
        Declared limit constants (``C``, ``p_hat``, ``q_hat``, ``B``, ``c``).
        ``C`` may be ``inf`` for the Wigner regimes, which triggers the swap.
    constant_tol : float
        Relative tolerance between declared constants and their finite-N
        plug-in values at the largest ``N`` of an experiment.
    """

    regime: Regime
    constants: dict = field(default_factory=dict)
    constant_tol: float = 0.25

    def __post_init__(self):
        object.__setattr__(self, "regime", Regime.parse(self.regime))
        object.__setattr__(self, "constants", dict(self.constants))
        unknown = set(self.constants) - set(self.regime.constant_names)
        if self.regime in (Regime.WignerDegenerate,):
            unknown -= {"C"}
        if unknown:
            raise DomainError(
                f"constants {sorted(unknown)} do not belong to regime {self.regime.value}"
            )

    @property
    def mirrored(self) -> bool:
        C = self.constants.get("C")
        return C is not None and math.isinf(float(C))

    def instance(self, p, q, N, *, s=None, b=None) -> RegimeInstance:
        """Resolve ``(a_N, b_N, s_N)`` and plug-in constants at one ``N``.

        ``s`` and ``b`` are the per-N time scale and centre for the local
        regimes; they are ignored elsewhere.
        """
        reg = self.regime
        p = float(p)
        q = float(q)
        mirrored = False
        if reg in (Regime.WignerStationary, Regime.WignerDegenerate) and self.mirrored:
            p, q = q, p
            mirrored = True
        ModelParams(p=p, q=q, N=N)
        const = {}
        if reg in (Regime.WignerStationary, Regime.WignerDegenerate):
            a = q / math.sqrt(N * p) if reg is Regime.WignerStationary else math.sqrt(q / N)
            bb = (p - q) / (p + q)
            ss = p + q
            if reg is Regime.WignerStationary:
                const["C"] = p / q
        elif reg is Regime.MPStationary:
            a, bb, ss = q / N, -1.0, p + q
            const["p_hat"] = p * q / (N * (p + q))
        elif reg is Regime.NCMPTimeInverted:
            a, bb, ss = p / N, 1.0, p + q
            const["q_hat"] = q * p / (N * (p + q))
        else:
            if s is None:
                raise DomainError(f"regime {reg.value} needs a time scale s_N")
            ss = float(s)
            if not ss > 0:
                raise DomainError("s_N must be positive")
            if reg in (Regime.MPLocal, Regime.NCMPLocal):
                a = ss / N
                bb = -1.0 if reg is Regime.MPLocal else 1.0
                if reg is Regime.MPLocal:
                    const["p_hat"] = p / N
                else:
                    const["q_hat"] = q / N
            else:
                if b is None:
                    b = self.constants.get("B")
                if b is None:
                    raise DomainError(f"regime {reg.value} needs a centre b_N")
                bb = float(b)
                if reg is Regime.NCWignerLocal:
                    if not bb > 1:
                        raise DomainError("NCWignerLocal needs b_N > 1")
                elif not -1 < bb < 1:
                    raise DomainError("Wigner local regimes need -1 < b_N < 1")
                a = math.sqrt(ss / N)
                const["B"] = bb
                if reg is Regime.WignerLocalDrift:
                    const["c"] = a * (p - q - bb * (p + q)) / ss
        return RegimeInstance(regime=reg, N=int(N), p=p, q=q, a=a, b=bb, s=ss,
                              mirrored=mirrored, constants=const)

    def declared(self, name):
        v = self.constants.get(name)
        if v is None:
            return None
        v = float(v)
        if name == "C" and math.isinf(v):
            return 0.0
        return v

    def validate(self, instances, check_constants=True) -> list:
        """Check regime hypotheses and declared constants along ``N``.

        Returns a list of human readable problems; empty means valid.
        With ``check_constants=False`` only the growth hypotheses are
        checked; :meth:`constant_problems` covers the rest.
        """
        problems = []
        inst = sorted(instances, key=lambda r: r.N)
        reg = self.regime
        if not inst:
            return ["no N values"]
        if len(inst) >= 2:
            def growing(vals, label):
                if not all(v2 > v1 for v1, v2 in zip(vals, vals[1:])):
                    problems.append(f"{label} is not increasing along N")

            def shrinking(vals, label):
                if not all(v2 < v1 for v1, v2 in zip(vals, vals[1:])):
                    problems.append(f"{label} is not decreasing along N")

            P = [r.p / r.N for r in inst]
            Q = [r.q / r.N for r in inst]
            if reg in (Regime.WignerStationary, Regime.WignerDegenerate):
                growing(P, "p_N/N")
                growing(Q, "q_N/N")
            if reg is Regime.MPStationary:
                growing(Q, "q_N/N")
            if reg is Regime.NCMPTimeInverted:
                growing(P, "p_N/N")
            if reg in (Regime.WignerLocal, Regime.NCWignerLocal):
                shrinking([(r.p + r.q) / math.sqrt(r.N * r.s) for r in inst],
                          "(p_N+q_N)/sqrt(N s_N)")
            if reg in (Regime.MPLocal, Regime.NCMPLocal):
                shrinking([(r.p + r.q) / r.s for r in inst], "(p_N+q_N)/s_N")
            if reg is Regime.WignerLocalDrift:
                growing([(r.p + r.q) / r.N for r in inst], "(p_N+q_N)/N")
        if reg is Regime.WignerDegenerate and len(inst) >= 2:
            C = [r.p / r.q for r in inst]
            if not all(c2 < c1 for c1, c2 in zip(C, C[1:])):
                problems.append("p_N/q_N is not decreasing to 0")
        if check_constants:
            problems.extend(self.constant_problems(inst))
        return problems

    def constant_problems(self, instances) -> list:
        """Declared constants that disagree with the plug-in values at the largest N."""
        problems = []
        if not instances:
            return problems
        last = max(instances, key=lambda r: r.N)
        for name, plug in last.constants.items():
            dec = self.declared(name)
            if dec is None:
                continue
            scale = max(abs(dec), 1.0)
            if abs(plug - dec) > self.constant_tol * scale:
                problems.append(
                    f"declared {name}={dec:.6g} differs from finite-N value {plug:.6g} "
                    f"at N={last.N}"
                )
        return problems
