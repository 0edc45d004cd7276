"""Time stepping for the Jacobi diffusions at finite ``kappa``.

An Euler step is ``X <- X + drift dt + sqrt(2/kappa) sigma(X) sqrt(dt) xi``
with ``sigma = sqrt(max(0, 1 - x^2))`` (compact) or ``sqrt(max(0, x^2 - 1))``
(noncompact), followed by projection or reflection into the domain and a
sort. The split-step scheme keeps the noise kick and replaces the drift
increment by the exact frozen flow over ``dt``.

Replica ``r`` draws its normals from a Philox stream keyed by ``(seed, r)``
so paths do not depend on how many replicas run together.
"""

from __future__ import annotations

import enum
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .detflow import IntegratorOptions, _collision_cap, _integrate, solve_from_boundary
from .errors import CollisionError, DomainError, GrowthGuardError
from .model import Domain, ModelParams, ParticleState, RegimeInstance, ScalingRegime


class Scheme(enum.Enum):
    """``EulerProjected`` and ``EulerReflected`` are plain Euler-Maruyama.

    ``SplitStep`` applies the Euler noise kick (with projection) and then
    the exact drift flow over the step, computed by the adaptive ODE
    integrator. The flow never lets particles cross, so the scheme stays
    stable when the noise per step is comparable to the spacing, where
    plain Euler blows up on the ``1/(x_i - x_j)`` terms.
    """

    EulerProjected = "EulerProjected"
    EulerReflected = "EulerReflected"
    SplitStep = "SplitStep"

    @classmethod
    def parse(cls, value):
        return value if isinstance(value, Scheme) else cls(value)


@dataclass(frozen=True)
class SdeConfig:
    """Simulation settings.

    ``dt=None`` picks ``0.1 min(1/(p+q), collision cap)`` at the start (or
    at a short deterministic lead-in for boundary starts) for the Euler
    schemes and ``0.02/(p+q)`` for ``SplitStep``. ``ramp`` is the growth
    factor of the geometric step ramp used by the Euler schemes after a
    boundary start.
    """

    params: ModelParams
    scheme: Scheme = Scheme.EulerProjected
    dt: float = None
    seed: int = 0
    replicas: int = 1
    ramp: float = 0.1
    growth_guard: float = 1e12

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme.parse(self.scheme))
        if self.dt is not None and not self.dt > 0:
            raise DomainError("dt must be positive")
        if int(self.replicas) < 1:
            raise DomainError("replicas must be >= 1")
        if not math.isfinite(self.params.kappa):
            raise DomainError("SDE needs finite kappa; use detflow for the frozen flow")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise DomainError("seed must be a 64-bit unsigned integer")


@dataclass
class SdePath:
    """One replica.

    ``times``/``coords`` hold the requested output times. With
    ``record="all"`` the full step grid (``step_times``, ``step_coords``)
    and the standard normals of every step (``normals``) are kept too.
    """

    times: np.ndarray
    coords: np.ndarray
    replica_id: int
    domain: Domain
    p: float
    q: float
    kappa: float
    step_times: np.ndarray = None
    step_coords: np.ndarray = None
    normals: np.ndarray = None
    stats: dict = field(default_factory=dict)

    @property
    def N(self):
        return self.coords.shape[1]

    def state(self, i) -> ParticleState:
        return ParticleState(self.domain, self.coords[i])

    @property
    def states(self):
        return [self.state(i) for i in range(len(self.times))]

    def to_csv(self, fh=None):
        lines = ["t," + ",".join(f"x_{i + 1}" for i in range(self.N))]
        for t, row in zip(self.times, self.coords):
            lines.append(",".join(f"{v:.17g}" for v in (t, *row)))
        text = "\n".join(lines) + "\n"
        if fh is not None:
            fh.write(text)
        return text

    def to_json(self):
        return {"replica_id": self.replica_id, "domain": self.domain.value, "p": self.p,
                "q": self.q, "kappa": self.kappa, "times": self.times.tolist(),
                "coords": self.coords.tolist(), "stats": self.stats}

    def dumps(self):
        return json.dumps(self.to_json())


def replica_generator(seed, replica_id) -> np.random.Generator:
    """Philox stream of one replica; independent of the replica count."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, int(replica_id)])
    return np.random.Generator(np.random.Philox(ss))


def _project(X, domain, scheme):
    if scheme is Scheme.EulerReflected:
        if domain is Domain.CompactAlcove:
            X = np.where(X > 1.0, 2.0 - X, X)
            X = np.where(X < -1.0, -2.0 - X, X)
        else:
            X = np.where(X < 1.0, 2.0 - X, X)
    if domain is Domain.CompactAlcove:
        np.clip(X, -1.0, 1.0, out=X)
    else:
        np.maximum(X, 1.0, out=X)
    X.sort(axis=-1)
    return X


def _sigma(X, domain):
    if domain is Domain.CompactAlcove:
        return np.sqrt(np.maximum(0.0, 1.0 - X * X))
    return np.sqrt(np.maximum(0.0, X * X - 1.0))


_FLOW_OPTS = IntegratorOptions(rtol=1e-8, monitor=False)


def _flow(x, p, q, domain, h):
    """Drift flow over ``h`` from a state in the closed domain."""
    if domain.is_interior(x):
        try:
            return _integrate(x, p, q, domain, 0.0, np.array([h]), _FLOW_OPTS)[0][-1]
        except CollisionError:
            pass
        # merge near ties and restart as a boundary start
        span = max(float(x[-1] - x[0]), 1e-300)
        x = x.copy()
        close = np.flatnonzero(np.diff(x) < 1e-7 * span)
        for i in close:
            x[i] = x[i + 1] = 0.5 * (x[i] + x[i + 1])
    return solve_from_boundary(x, p, q, domain, times=np.array([h]), opts=_FLOW_OPTS).coords[-1]


def _default_dt(x, p, q, domain):
    d = kernels.drift(x, p, q, domain.sign)
    cap = _collision_cap(x, d, domain, 1.0)
    return 0.1 * min(1.0 / (p + q), cap)


def _grid(t0, t_end, dt, times, ramp_from=None, ramp=0.1):
    """Step grid from ``t0`` to ``t_end`` that hits every output time."""
    pts = []
    t = t0
    if ramp_from is not None:
        h = ramp_from
        while t + h < min(t_end, t0 + dt / ramp) and h < dt:
            t += h
            pts.append(t)
            h = ramp * t
    n = max(0, int(math.ceil((t_end - t) / dt - 1e-12)))
    pts.extend(t + dt * np.arange(1, n + 1))
    grid = np.unique(np.concatenate(([t0], np.asarray(pts, dtype=float), times)))
    return grid[(grid >= t0) & (grid <= t_end)]


def simulate(x0, cfg: SdeConfig, t_end, domain=Domain.CompactAlcove, times=None,
             replica_ids=None, record="outputs", normals=None):
    """Simulate several replicas at once.

    Parameters
    ----------
    x0 : ParticleState or array_like
        Start in the closed domain. With the Euler schemes, starts with
        ties or wall contact are run deterministically up to a tiny time
        and continue with a geometric step ramp; ``SplitStep`` handles them
        through the boundary solver of its first flow step. Such runs are
        flagged ``experimental_boundary_start`` in the stats.
    t_end : float
        Raw end time.
    times : array_like, optional
        Output times in ``[0, t_end]``; default ``[0, t_end]``.
    replica_ids : sequence of int, optional
        Defaults to ``range(cfg.replicas)``.
    record : {"outputs", "all"}
        ``"all"`` keeps every step and its normals (needed by
        :func:`martingale_diagnostic`).
    normals : callable, optional
        ``normals(replica_id, shape)`` replacing the Gaussian draws; used to
        test scheme degeneration.

    Returns
    -------
    list of SdePath
    """
    domain = Domain.parse(domain)
    par = cfg.params
    p, q, kappa = float(par.p), float(par.q), float(par.kappa)
    c = x0.coords if isinstance(x0, ParticleState) else np.asarray(x0, dtype=float)
    ParticleState(domain, c)
    if c.size != par.N:
        raise DomainError(f"x0 has {c.size} particles, params say N={par.N}")
    t_end = float(t_end)
    times = np.array([0.0, t_end]) if times is None else np.unique(np.asarray(times, float))
    if times.size and (times[0] < 0 or times[-1] > t_end):
        raise DomainError("output times must lie in [0, t_end]")
    ids = list(range(int(cfg.replicas))) if replica_ids is None else [int(r) for r in replica_ids]
    R = len(ids)
    stats = {}
    t0 = 0.0
    start = c.copy()
    ramp_from = None
    split = cfg.scheme is Scheme.SplitStep
    if split:
        dt = cfg.dt if cfg.dt is not None else 0.02 / (p + q)
        if not domain.is_interior(c):
            stats["experimental_boundary_start"] = True
    elif not domain.is_interior(c):
        lead = 1e-3 * t_end
        tr = solve_from_boundary(c, p, q, domain, times=np.array([lead]),
                                 opts=IntegratorOptions(monitor=False))
        t0 = float(tr.stats["t_b"])
        boot = solve_from_boundary(c, p, q, domain, times=np.array([t0]),
                                   opts=IntegratorOptions(monitor=False), t_b=t0)
        start = boot.coords[-1]
        ramp_from = cfg.ramp * t0
        dt = cfg.dt if cfg.dt is not None else _default_dt(tr.coords[-1], p, q, domain)
        stats["bootstrap_t"] = t0
        stats["experimental_boundary_start"] = True
    else:
        dt = cfg.dt if cfg.dt is not None else _default_dt(c, p, q, domain)
    stats["dt"] = dt
    grid = _grid(t0, t_end, dt, times[times >= t0], ramp_from, cfg.ramp)
    out_idx = {float(t): i for i, t in enumerate(times)}
    out = np.empty((R, times.size, c.size))
    for t in times[times < t0]:
        # the deterministic lead-in is noise free
        i = out_idx[float(t)]
        out[:, i] = c if t == 0 else solve_from_boundary(
            c, p, q, domain, times=np.array([t]), opts=IntegratorOptions(monitor=False)).coords[-1]
    gens = [replica_generator(cfg.seed, r) for r in ids]
    keep = record == "all"
    steps = grid.size - 1
    if keep:
        all_x = np.empty((R, steps + 1, c.size))
        all_z = np.empty((R, steps, c.size))
    X = np.tile(start, (R, 1))
    if t0 in out_idx:
        out[:, out_idx[t0]] = X
    if keep:
        all_x[:, 0] = X
    noise = math.sqrt(2.0 / kappa)
    warned = False
    for k in range(steps):
        h = grid[k + 1] - grid[k]
        if normals is None:
            Z = np.stack([g.standard_normal(c.size) for g in gens])
        else:
            Z = np.stack([np.asarray(normals(r, (c.size,)), dtype=float) for r in ids])
        if split:
            X = _project(X + noise * _sigma(X, domain) * math.sqrt(h) * Z, domain, cfg.scheme)
            X = np.stack([_flow(x, p, q, domain, h) for x in X])
        else:
            D = kernels.drift_batch(X, p, q, domain.sign)
            if not warned and c.size > 1:
                gap = np.min(np.diff(X, axis=1))
                if np.max(np.abs(D)) * h > gap > 0:
                    warnings.warn(f"dt={h:.3g} is large against the drift; Euler steps may be "
                                  "unstable", RuntimeWarning, stacklevel=2)
                    warned = True
            X = X + D * h + noise * _sigma(X, domain) * math.sqrt(h) * Z
            if not np.all(np.isfinite(X)):
                raise DomainError(f"non-finite state at t={grid[k + 1]:.6g}; reduce dt")
            X = _project(X, domain, cfg.scheme)
        if domain is Domain.NoncompactChamber and np.max(X) > cfg.growth_guard:
            raise GrowthGuardError(f"state exceeded {cfg.growth_guard:g} at t={grid[k + 1]:.6g}")
        if keep:
            all_x[:, k + 1] = X
            all_z[:, k] = Z
        i = out_idx.get(float(grid[k + 1]))
        if i is not None:
            out[:, i] = X
    stats["steps"] = steps
    paths = []
    for j, r in enumerate(ids):
        paths.append(SdePath(times=times, coords=out[j], replica_id=r, domain=domain, p=p, q=q,
                             kappa=kappa,
                             step_times=grid if keep else None,
                             step_coords=all_x[j] if keep else None,
                             normals=all_z[j] if keep else None,
                             stats=dict(stats)))
    return paths


def simulate_compact(x0, cfg: SdeConfig, t_end, times=None, replica=0, record="outputs",
                     normals=None) -> SdePath:
    """One compact replica; identical to the same replica of :func:`simulate`."""
    return simulate(x0, cfg, t_end, Domain.CompactAlcove, times, [replica], record, normals)[0]


def simulate_noncompact(x0, cfg: SdeConfig, t_end, times=None, replica=0, record="outputs",
                        normals=None) -> SdePath:
    """One noncompact replica."""
    return simulate(x0, cfg, t_end, Domain.NoncompactChamber, times, [replica], record, normals)[0]


@dataclass
class MartingaleSeries:
    times: np.ndarray
    values: np.ndarray
    sup: float


def martingale_diagnostic(path: SdePath, regime, l) -> MartingaleSeries:
    """Noise part of the l-th rescaled moment along a path.

    ``M_{l,t} = (l/N) sqrt(2/kappa) sum_steps sum_i Y_i^{l-1} a sqrt(1-x_i^2) dB_i``
    with ``Y = a(x - b)`` taken at the start of each step and ``dB`` the
    Brownian increment on the clock rescaled by ``s``; this is the noise of
    the moment equation written in the regime's time.

    Parameters
    ----------
    path : SdePath
        Must be recorded with ``record="all"``.
    regime : RegimeInstance or ScalingRegime
        A ``ScalingRegime`` is resolved at the path's ``(p, q, N)``.
    """
    if path.domain is not Domain.CompactAlcove:
        raise DomainError("martingale_diagnostic is defined for the compact process")
    if l < 1:
        raise DomainError("l must be >= 1")
    if path.step_coords is None:
        raise DomainError("path was not recorded with record='all'")
    if isinstance(regime, ScalingRegime):
        if regime.mirrored:
            raise DomainError("pass the RegimeInstance used to run a mirrored regime")
        regime = regime.instance(path.p, path.q, path.N)
    if not isinstance(regime, RegimeInstance):
        raise DomainError("regime must be a RegimeInstance or ScalingRegime")
    a, b, s = regime.a, regime.b, regime.s
    X = path.step_coords[:-1]
    Y = a * (X - b)
    ymax = float(np.max(np.abs(Y))) if Y.size else 0.0
    if l > 1 and ymax > 1 and (l - 1) * math.log10(ymax) > 300:
        raise DomainError(f"Y^{l - 1} overflows (max |Y| = {ymax:.3g})")
    h = np.diff(path.step_times)
    dB = path.normals * np.sqrt(s * h)[:, None]
    sig = np.sqrt(np.maximum(0.0, 1.0 - X * X))
    inc = (l / path.N) * math.sqrt(2.0 / (path.kappa * s)) * np.sum(
        Y ** (l - 1) * a * sig * dB, axis=1)
    vals = np.concatenate(([0.0], np.cumsum(inc)))
    return MartingaleSeries(times=path.step_times, values=vals, sup=float(np.max(np.abs(vals))))
