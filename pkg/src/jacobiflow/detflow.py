"""Deterministic (frozen) particle dynamics.

Interior integration uses a Dormand-Prince 5(4) pair whose error is
measured against the local particle spacing, with an extra cap on the
step so that no approaching pair or wall contact can be overrun.

Starts with ties or wall contact are handled by a short bootstrap:
either the exact linear dynamics of the elementary symmetric polynomials
(small ``N``) or the self-similar cluster asymptotics (any ``N``), after
which the interior integrator takes over.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy.linalg import eigvals, expm
from scipy.special import roots_genlaguerre, roots_hermite

from . import kernels
from .errors import (
    CollisionError,
    DomainError,
    GrowthGuardError,
    NotInImageError,
    SingularStartError,
)
from .expsum import ExpPolySum
from .model import Domain, ParticleState

# Dormand-Prince 5(4)
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])


@dataclass(frozen=True)
class IntegratorOptions:
    """Tolerances of the interior integrator.

    Attributes
    ----------
    rtol : float
        Error tolerance relative to the local spacing of each particle
        (distance to its nearest neighbour or wall).
    atol : float
        Absolute floor of the error scale.
    eta : float
        Collision cap factor: a step never exceeds ``eta`` times the time
        any approaching pair (or particle and wall) needs to meet at the
        current velocities.
    growth_guard : float
        Noncompact runs abort once ``|x_N|`` exceeds this value.
    monitor : bool
        Track the discriminant at every accepted step.
    max_steps : int
    """

    rtol: float = 1e-10
    atol: float = 1e-15
    eta: float = 0.25
    growth_guard: float = 1e12
    monitor: bool = True
    max_steps: int = 5_000_000

    def to_dict(self):
        return asdict(self)


@dataclass
class Trajectory:
    """Particle positions at requested raw times."""

    times: np.ndarray
    coords: np.ndarray
    domain: Domain
    p: float
    q: float
    stats: dict = field(default_factory=dict)

    @property
    def N(self):
        return self.coords.shape[1]

    def state(self, i) -> ParticleState:
        return ParticleState(self.domain, self.coords[i])

    @property
    def final(self) -> ParticleState:
        return self.state(-1)

    def to_csv(self, fh=None):
        """Columns ``t, x_1..x_N``, 17 significant digits.

        Returns the CSV text when ``fh`` is None.
        """
        own = fh is None
        if own:
            fh = io.StringIO()
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"x_{i + 1}" for i in range(self.N)])
        for t, row in zip(self.times, self.coords):
            w.writerow([f"{t:.17g}"] + [f"{v:.17g}" for v in row])
        if own:
            return fh.getvalue()
        return None

    def to_json(self):
        return {
            "domain": self.domain.value,
            "p": self.p,
            "q": self.q,
            "times": [float(t) for t in self.times],
            "coords": [[float(v) for v in row] for row in self.coords],
            "stats": self.stats,
        }

    def dumps(self):
        return json.dumps(self.to_json(), indent=1)


# ------------------------------------------------------------------ ESP


def esp_forward(x):
    """Elementary symmetric polynomials ``(e_1, ..., e_N)`` of ``x``.

    Accumulates the product ``prod_i (1 + x_i z)`` one factor at a time.
    """
    c = x.coords if isinstance(x, ParticleState) else np.asarray(x, dtype=float)
    n = c.size
    e = np.zeros(n + 1)
    e[0] = 1.0
    for i, xi in enumerate(c):
        e[1:i + 2] = e[1:i + 2] + xi * e[0:i + 1]
    return e[1:]


def esp_generator(N, p, q, domain=Domain.CompactAlcove, shift=0.0, scale=1.0):
    """Matrix ``G`` of the linear ESP dynamics ``d/dt (e_0..e_N) = G e``.

    ``e`` are the ESPs of ``y = (x - shift)/scale``. Row ``k`` reads
    ``r_k e_k + (A + 2 c1 (k-1)) (N-k+1) e_{k-1} - c2 (N-k+2)(N-k+1) e_{k-2}``
    with ``r_k = k(k-1-(p+q))``, ``A = ((p-q) - (p+q) shift)/scale``,
    ``c1 = shift/scale`` and ``c2 = (1 - shift^2)/scale^2``; the noncompact
    generator is the negative.
    """
    domain = Domain.parse(domain)
    G = np.zeros((N + 1, N + 1))
    A = ((p - q) - (p + q) * shift) / scale
    c1 = shift / scale
    c2 = (1.0 - shift * shift) / (scale * scale)
    for k in range(1, N + 1):
        G[k, k] = k * (k - 1 - (p + q))
        G[k, k - 1] = (A + 2.0 * c1 * (k - 1)) * (N - k + 1)
        if k >= 2:
            G[k, k - 2] = -c2 * (N - k + 2) * (N - k + 1)
    return domain.sign * G


@dataclass(frozen=True)
class ESPTrajectory:
    """Closed-form ESP trajectory, one :class:`ExpPolySum` per ``e_k``."""

    N: int
    components: tuple
    domain: Domain
    shift: float = 0.0
    scale: float = 1.0

    def __call__(self, t):
        """ESP values, shape ``(N,)`` or ``(len(t), N)``."""
        vals = np.array([c(t) for c in self.components])
        return vals.T if np.ndim(t) else vals

    def positions(self, t):
        """Particle positions at a scalar time."""
        return self.shift + self.scale * real_roots(self(t))

    def to_json(self):
        return {
            "N": self.N,
            "domain": self.domain.value,
            "shift": self.shift,
            "scale": self.scale,
            "components": [c.to_json() for c in self.components],
        }


def esp_closed_form(e0, p, q, domain=Domain.CompactAlcove, shift=0.0, scale=1.0):
    """Exact ESP trajectory from initial values ``e0 = (e_1..e_N)``.

    Built order by order with the variation-of-constants map on
    exponential-polynomial sums.
    """
    domain = Domain.parse(domain)
    e0 = np.asarray(e0, dtype=float)
    N = e0.size
    G = esp_generator(N, p, q, domain, shift, scale)
    comps = [ExpPolySum.constant(1.0)]
    for k in range(1, N + 1):
        forcing = comps[k - 1] * G[k, k - 1]
        if k >= 2:
            forcing = forcing + comps[k - 2] * G[k, k - 2]
        comps.append(forcing.solve_linear(G[k, k], e0[k - 1]))
    return ESPTrajectory(N=N, components=tuple(comps[1:]), domain=domain,
                         shift=float(shift), scale=float(scale))


def _horner(coef, z):
    v = np.zeros_like(z)
    d = np.zeros_like(z)
    for c in coef:
        d = d * z + v
        v = v * z + c
    return v, d


def real_roots(e, tol_root=1e-8, polish=3):
    """Sorted real roots of ``z^N - e_1 z^{N-1} + e_2 z^{N-2} - ...``.

    Eigenvalues of the companion matrix (LAPACK balances it first),
    followed by a few guarded Newton steps on the monic polynomial.
    """
    e = np.asarray(e, dtype=float)
    N = e.size
    coef = np.empty(N + 1)
    coef[0] = 1.0
    coef[1:] = e * (-1.0) ** np.arange(1, N + 1)
    if N == 0:
        return np.zeros(0)
    if N == 1:
        return np.array([e[0]])
    comp = np.zeros((N, N))
    comp[0, :] = -coef[1:]
    comp[np.arange(1, N), np.arange(N - 1)] = 1.0
    z = eigvals(comp, overwrite_a=True, check_finite=False)
    scale = max(1.0, float(np.max(np.abs(z))))
    if np.any(np.abs(z.imag) > tol_root * scale):
        raise NotInImageError(
            f"polynomial has non-real roots (max |Im| = {np.max(np.abs(z.imag)):.3g})"
        )
    roots = np.sort(z.real)
    for _ in range(polish):
        v, d = _horner(coef, roots)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            cand = roots - np.where(d != 0, v / d, 0.0)
        vc, _ = _horner(coef, cand)
        better = np.isfinite(cand) & (np.abs(vc) < np.abs(v))
        trial = np.where(better, cand, roots)
        if np.all(np.diff(trial) >= 0):
            roots = trial
    return roots


def esp_invert(e, domain=None, tol_root=1e-8):
    """State whose ESP vector is ``e``.

    Parameters
    ----------
    e : array_like
        ``(e_1, ..., e_N)``.
    domain : Domain, optional
        Tag of the returned state. By default the alcove is used when all
        roots lie in ``[-1, 1]`` and the chamber otherwise. Roots that
        overshoot a wall by rounding are moved onto it.
    tol_root : float
        Largest admissible ``|Im z|`` relative to ``max(1, |z|)``.

    Raises
    ------
    NotInImageError
        Non-real roots, or roots clearly outside the requested domain.
    """
    roots = real_roots(e, tol_root)
    N = roots.size
    if domain is None:
        inside = N == 0 or (roots[0] >= -1 - tol_root and roots[-1] <= 1 + tol_root)
        domain = Domain.CompactAlcove if inside else Domain.NoncompactChamber
    domain = Domain.parse(domain)
    if N:
        if domain is Domain.CompactAlcove:
            if roots[0] < -1 - tol_root or roots[-1] > 1 + tol_root:
                raise NotInImageError("roots leave [-1, 1]")
            roots = np.clip(roots, -1.0, 1.0)
        else:
            if roots[0] < 1 - tol_root:
                raise NotInImageError("roots below the chamber wall")
            roots = np.maximum(roots, 1.0)
    return ParticleState(domain, roots)


# ------------------------------------------------------------ discriminant


def log_abs_discriminant(x, domain=Domain.CompactAlcove):
    """``(sign, log|D|)`` of the discriminant; ``(0, -inf)`` when it vanishes."""
    domain = Domain.parse(domain)
    c = x.coords if isinstance(x, ParticleState) else np.asarray(x, dtype=float)
    N = c.size
    wall = (1.0 - c * c) if domain is Domain.CompactAlcove else (c * c - 1.0)
    if np.any(wall <= 0) or (N > 1 and np.any(np.diff(c) <= 0)):
        return 0.0, -math.inf
    pairs = N * (N - 1) // 2
    sign = -1.0 if pairs % 2 else 1.0
    logd = float(np.sum(np.log(wall))) + 2.0 * kernels.log_pair_sum(c)
    return sign, logd


def discriminant(x, domain=Domain.CompactAlcove):
    """``prod_i w(x_i) * prod_{i != j} (x_j - x_i)``.

    ``w(x) = 1 - x^2`` on the alcove and ``x^2 - 1`` on the chamber.
    The ordered-pair product is ``(-1)^{N(N-1)/2} prod_{i<j} (x_j-x_i)^2``,
    so for sorted interior states the sign is fixed by ``N`` and only
    vanishing carries information.
    """
    domain = Domain.parse(domain)
    c = x.coords if isinstance(x, ParticleState) else np.asarray(x, dtype=float)
    wall = (1.0 - c * c) if domain is Domain.CompactAlcove else (c * c - 1.0)
    d = float(np.prod(wall))
    for i in range(c.size):
        for j in range(c.size):
            if i != j:
                d *= c[j] - c[i]
    return d


# ----------------------------------------------------------- integrator


def _spacing(x, domain):
    n = x.size
    if domain is Domain.CompactAlcove:
        left = np.empty(n)
        right = np.empty(n)
        left[0] = x[0] + 1.0
        right[-1] = 1.0 - x[-1]
    else:
        left = np.empty(n)
        right = np.empty(n)
        left[0] = x[0] - 1.0
        right[-1] = np.inf
    if n > 1:
        g = np.diff(x)
        left[1:] = g
        right[:-1] = g
    return np.minimum(left, right)


def _collision_cap(x, d, domain, eta):
    cap = np.inf
    if x.size > 1:
        closing = d[:-1] - d[1:]
        m = closing > 0
        if np.any(m):
            cap = min(cap, float(np.min(np.diff(x)[m] / closing[m])))
    if domain is Domain.CompactAlcove:
        if d[-1] > 0:
            cap = min(cap, (1.0 - x[-1]) / d[-1])
        if d[0] < 0:
            cap = min(cap, (x[0] + 1.0) / -d[0])
    elif d[0] < 0:
        cap = min(cap, (x[0] - 1.0) / -d[0])
    return eta * cap


def _closest_pair(x, domain):
    if x.size > 1:
        i = int(np.argmin(np.diff(x)))
        return (i, i + 1), float(x[i + 1] - x[i])
    wall = (1.0 - abs(x[0])) if domain is Domain.CompactAlcove else x[0] - 1.0
    return (0, 0), float(wall)


def _integrate(x0, p, q, domain, t0, times, opts):
    """Core DP5 loop from state ``x0`` at time ``t0`` to each of ``times``."""
    sign = domain.sign
    x = np.array(x0, dtype=float)
    out = np.empty((len(times), x.size))
    t = float(t0)

    def f(y):
        return kernels.drift(y, p, q, sign)

    k1 = f(x)
    h = None
    stats = {"steps": 0, "rejected": 0, "min_log_abs_disc": math.inf, "disc_sign": None}
    eps = np.finfo(float).eps
    for idx, t_out in enumerate(times):
        while t < t_out:
            span = t_out - t
            cap = _collision_cap(x, k1, domain, opts.eta)
            if h is None:
                g = _spacing(x, domain)
                vel = np.abs(k1) + 1e-300
                h = min(0.01 * float(np.min(g / vel)), span)
            h = min(h, cap, span)
            if h <= 64 * eps * max(abs(t), abs(t_out), 1e-300):
                pair, gap = _closest_pair(x, domain)
                raise CollisionError(pair, t, gap)
            ks = [k1]
            ok = True
            for s in range(1, 6):
                y = x + h * sum(a * k for a, k in zip(_A[s], ks))
                ks.append(f(y))
            xn = x + h * (_B[0] * ks[0] + _B[2] * ks[2] + _B[3] * ks[3]
                          + _B[4] * ks[4] + _B[5] * ks[5])
            if not (np.all(np.isfinite(xn)) and domain.is_interior(xn, 0.0)):
                ok = False
            if ok:
                k7 = f(xn)
                err = h * (_E[0] * ks[0] + _E[2] * ks[2] + _E[3] * ks[3]
                           + _E[4] * ks[4] + _E[5] * ks[5] + _E[6] * k7)
                sc = opts.atol + opts.rtol * np.minimum(_spacing(x, domain), _spacing(xn, domain))
                en = float(np.max(np.abs(err) / sc))
                if not np.isfinite(en):
                    ok = False
            if not ok:
                stats["rejected"] += 1
                h *= 0.25
                continue
            if en > 1.0:
                stats["rejected"] += 1
                h *= max(0.2, 0.9 * en ** -0.2)
                continue
            t = t_out if h == span else t + h
            x = xn
            k1 = k7
            stats["steps"] += 1
            if stats["steps"] > opts.max_steps:
                raise RuntimeError(f"more than {opts.max_steps} steps")
            if domain is Domain.NoncompactChamber and abs(x[-1]) > opts.growth_guard:
                raise GrowthGuardError(f"|x_N| = {x[-1]:.3g} exceeds growth guard at t={t:.6g}")
            if opts.monitor:
                sgn, ld = log_abs_discriminant(x, domain)
                stats["min_log_abs_disc"] = min(stats["min_log_abs_disc"], ld)
                if stats["disc_sign"] is None:
                    stats["disc_sign"] = sgn
                elif sgn != stats["disc_sign"]:
                    stats["disc_sign_changed"] = True
            h = h * min(5.0, max(0.2, 0.9 * max(en, 1e-10) ** -0.2))
        out[idx] = x
    return out, stats


def _as_times(t_end, times):
    if times is None:
        if t_end is None:
            raise DomainError("give t_end or times")
        times = [float(t_end)]
    times = np.asarray(times, dtype=float).ravel()
    if np.any(times < 0) or np.any(np.diff(times) < 0):
        raise DomainError("output times must be nonnegative and nondecreasing")
    return times


def integrate(x0, p, q, domain, t_end=None, times=None, opts=None) -> Trajectory:
    """Integrate the frozen system from a strictly interior start."""
    domain = Domain.parse(domain)
    opts = opts or IntegratorOptions()
    c = x0.coords if isinstance(x0, ParticleState) else np.asarray(x0, dtype=float)
    if not domain.is_interior(c):
        raise DomainError("interior integration needs a strictly interior start; "
                          "use solve_from_boundary")
    times = _as_times(t_end, times)
    coords, stats = _integrate(c, float(p), float(q), domain, 0.0, times, opts)
    return Trajectory(times=times, coords=coords, domain=domain, p=float(p), q=float(q),
                      stats=stats)


def integrate_interior(x0, p, q, t_end=None, times=None, opts=None) -> Trajectory:
    """Compact system from an interior start; output at ``times`` (raw clock)."""
    return integrate(x0, p, q, Domain.CompactAlcove, t_end, times, opts)


def integrate_noncompact(x0, p, q, t_end=None, times=None, opts=None) -> Trajectory:
    """Noncompact system from an interior start."""
    return integrate(x0, p, q, Domain.NoncompactChamber, t_end, times, opts)


# ------------------------------------------------------ boundary starts


def find_clusters(x, domain, tie_tol=1e-12):
    """Group coordinates into ties and wall contacts.

    Returns a list of ``(start, stop, kind)`` slices with ``kind`` one of
    ``"interior"``, ``"lower"`` (wall at -1 or at 1 for the chamber) and
    ``"upper"`` (wall at +1, alcove only).
    """
    domain = Domain.parse(domain)
    x = np.asarray(x, dtype=float)
    n = x.size
    out = []
    i = 0
    while i < n:
        j = i + 1
        while j < n and x[j] - x[j - 1] <= tie_tol * (1.0 + abs(x[j])):
            j += 1
        lo_wall = -1.0 if domain is Domain.CompactAlcove else 1.0
        if abs(x[i] - lo_wall) <= tie_tol * 2:
            kind = "lower"
        elif domain is Domain.CompactAlcove and abs(x[j - 1] - 1.0) <= tie_tol * 2:
            kind = "upper"
        else:
            kind = "interior"
        out.append((i, j, kind))
        i = j
    return out


def asymptotic_start(x0, p, q, domain, t):
    """Leading-order self-similar state at small time ``t`` from ``x0``.

    A tie of ``m`` particles at an interior point ``b`` spreads as
    ``b + v t + 2 sqrt(|1-b^2| t) h_i`` with ``h`` the Hermite zeros and
    ``v`` the drift exerted by the remaining particles. A cluster of ``m``
    particles at a wall leaves it linearly in time along the zeros of a
    generalised Laguerre polynomial: ``1 + x = 2 t z`` with parameter
    ``p - N`` at -1, ``1 - x = 2 t z`` with ``q - N`` at +1, and
    ``x - 1 = 2 t z`` with ``q - N`` at the chamber wall.
    """
    domain = Domain.parse(domain)
    x0 = np.asarray(x0, dtype=float)
    N = x0.size
    x = x0.copy()
    sign = domain.sign
    for i, j, kind in find_clusters(x0, domain):
        m = j - i
        if kind == "interior":
            b = float(np.mean(x0[i:j]))
            others = np.concatenate((x0[:i], x0[j:]))
            v = (p - q) - (p + q) * b
            if others.size:
                v += 2.0 * float(np.sum((1.0 - b * others) / (b - others)))
            v *= sign
            if m == 1:
                x[i] = b + v * t
            else:
                h = roots_hermite(m)[0]
                x[i:j] = b + v * t + 2.0 * math.sqrt(abs(1.0 - b * b) * t) * h
        else:
            if domain is Domain.CompactAlcove and kind == "lower":
                z = roots_genlaguerre(m, p - N)[0] if m > 1 else np.array([p - N + 1.0])
                x[i:j] = -1.0 + 2.0 * t * z
            elif kind == "upper":
                z = roots_genlaguerre(m, q - N)[0] if m > 1 else np.array([q - N + 1.0])
                x[i:j] = np.sort(1.0 - 2.0 * t * z)
            else:
                z = roots_genlaguerre(m, q - N)[0] if m > 1 else np.array([q - N + 1.0])
                x[i:j] = 1.0 + 2.0 * t * z
    return np.sort(x)


def esp_bootstrap_state(x0, p, q, domain, t):
    """Exact state at time ``t`` via the linear ESP dynamics.

    The ESP vector is propagated with a matrix exponential in a frame
    centred and scaled on the asymptotic prediction, which keeps the
    coefficients of order one and the polynomial roots well separated.
    """
    domain = Domain.parse(domain)
    x0 = np.asarray(x0, dtype=float)
    N = x0.size
    guess = asymptotic_start(x0, p, q, domain, t)
    shift = float(np.mean(guess))
    scale = float(max(np.max(np.abs(guess - shift)), np.max(np.abs(x0 - shift)), 1e-300))
    e0 = np.concatenate(([1.0], esp_forward((x0 - shift) / scale)))
    G = esp_generator(N, p, q, domain, shift, scale)
    et = expm(G * t) @ e0
    y = real_roots(et[1:], tol_root=1e-6)
    return np.sort(shift + scale * y)


def _is_interior(x, domain):
    return domain.is_interior(x, 0.0) and np.all(np.isfinite(x))


def _bootstrap(c, p, q, domain, t, method, esp_max_n):
    """State at small ``t`` and the bootstrap that produced it."""
    if method in ("esp", "auto") and c.size <= esp_max_n:
        try:
            x = esp_bootstrap_state(c, p, q, domain, t)
        except NotInImageError:
            x = None
        if x is not None and _is_interior(x, domain):
            return x, "esp"
        if method == "esp":
            return None, "esp"
    return asymptotic_start(c, p, q, domain, t), "asymptotic"


def solve_from_boundary(x0, p, q, domain=Domain.CompactAlcove, t_end=None, times=None,
                        opts=None, method="auto", t_b=None, max_halvings=20,
                        esp_max_n=12) -> Trajectory:
    """Trajectory from a start with ties or wall contact.

    Parameters
    ----------
    x0 : ParticleState or array_like
        Start in the closed domain.
    method : {"auto", "esp", "asymptotic"}
        Bootstrap used on ``(0, t_b]``. ``esp`` is exact but its roots lose
        accuracy for tight clusters next to distant particles; ``auto``
        uses it for ``N <= esp_max_n`` whenever the result is strictly
        interior and falls back to the asymptotic state otherwise.
    t_b : float, optional
        Bootstrap time; defaults to ``1e-3/(p+q)`` for the exact bootstrap
        and additionally at most a millionth of the first positive output
        time when the asymptotic one is used. Halved up to
        ``max_halvings`` times when the state at ``t_b`` is not strictly
        interior.

    Returns
    -------
    Trajectory
        ``stats["t_b"]`` and ``stats["bootstrap"]`` record the bootstrap.
    """
    domain = Domain.parse(domain)
    opts = opts or IntegratorOptions()
    c = x0.coords if isinstance(x0, ParticleState) else np.asarray(x0, dtype=float)
    ParticleState(domain, c)
    p = float(p)
    q = float(q)
    times = _as_times(t_end, times)
    if domain.is_interior(c):
        return integrate(c, p, q, domain, times=times, opts=opts)
    N = c.size
    if method not in ("auto", "esp", "asymptotic"):
        raise DomainError(f"unknown bootstrap method {method!r}")
    if method == "auto" and N > esp_max_n:
        method = "asymptotic"
    positive = times[times > 0]
    if t_b is None:
        t_b = 1e-3 / (p + q)
        if method == "asymptotic" and positive.size:
            t_b = min(t_b, 1e-6 * float(positive[0]))
    xb = None
    used = None
    for _ in range(max_halvings + 1):
        cand, used = _bootstrap(c, p, q, domain, t_b, method, esp_max_n)
        if cand is not None and _is_interior(cand, domain):
            xb = cand
            break
        t_b *= 0.5
    if xb is None:
        raise SingularStartError(
            f"bootstrap did not reach the interior (last t_b={t_b:.3g}); the discriminant "
            "stayed numerically zero"
        )
    out = np.empty((times.size, N))
    early = times <= t_b
    kinds = {used}
    for i in np.flatnonzero(early):
        t = times[i]
        if t == 0:
            out[i] = c
            continue
        xe, kind = _bootstrap(c, p, q, domain, t, method, esp_max_n)
        if xe is None:
            raise SingularStartError(f"exact bootstrap failed at t={t:.3g}")
        out[i] = xe
        kinds.add(kind)
    stats = {"t_b": t_b, "bootstrap": "+".join(sorted(kinds))}
    late = ~early
    if np.any(late):
        coords, st = _integrate(xb, p, q, domain, t_b, times[late], opts)
        out[late] = coords
        stats.update(st)
    return Trajectory(times=times, coords=out, domain=domain, p=p, q=q, stats=stats)


# ------------------------------------------------------------- Lyapunov


@dataclass
class LyapunovReport:
    values: np.ndarray
    increments: np.ndarray
    min_increment: float
    monotone: bool


def log_potential(x, p, q):
    """``log V`` with ``V = prod (1-x_i)^{q+1-N} (1+x_i)^{p+1-N} prod_{i<j} (x_i-x_j)^2``."""
    c = x.coords if isinstance(x, ParticleState) else np.asarray(x, dtype=float)
    N = c.size
    return float((q + 1 - N) * np.sum(np.log1p(-c)) + (p + 1 - N) * np.sum(np.log1p(c))
                 + 2.0 * kernels.log_pair_sum(c))


def lyapunov_check(traj: Trajectory, p=None, q=None, tol=1e-10) -> LyapunovReport:
    """Evaluate the electrostatic log-potential along a compact trajectory.

    Along the frozen flow ``dx_i/dt = (1 - x_i^2) d(log V)/dx_i``, so the
    sequence is nondecreasing; increments down to ``-tol`` are tolerated
    as rounding.
    """
    if traj.domain is not Domain.CompactAlcove:
        raise DomainError("the potential check applies to the compact system")
    p = traj.p if p is None else p
    q = traj.q if q is None else q
    vals = np.array([log_potential(row, p, q) for row in traj.coords])
    inc = np.diff(vals)
    scale = max(1.0, float(np.max(np.abs(vals))))
    mn = float(np.min(inc)) if inc.size else 0.0
    return LyapunovReport(values=vals, increments=inc, min_increment=mn,
                          monotone=bool(mn >= -tol * scale))
