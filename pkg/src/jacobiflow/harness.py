"""Experiments: starting vectors, dynamics along N and convergence reports."""

from __future__ import annotations

import ast
import csv
import io
import json
import math
import operator
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .detflow import IntegratorOptions, solve_from_boundary
from .errors import ConfigError, DomainError, JacobiFlowError
from .freeprob import (available_order, evaluate, expr_from_json, expr_to_json, mp_moments, predict_limit,
                       semicircle_moments)
from .jacobi_poly import JacobiParams, jacobi_zeros
from .model import Domain, ModelParams, ParticleState, Regime, ScalingRegime
from .moments import MomentVector, empirical_moments, empirical_moments_batch
from .sde import Scheme, SdeConfig, simulate

SCHEMA = 1

# ------------------------------------------------------ parameter rules

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_FUNCS = {"sqrt": math.sqrt, "log": math.log, "exp": math.exp, "floor": math.floor,
          "ceil": math.ceil}


def _eval_node(node, env):
    if isinstance(node, ast.Expression):
        return _eval_node(node.body, env)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return float(node.value)
    if isinstance(node, ast.Name):
        if node.id not in env:
            raise ConfigError(f"unknown name {node.id!r} in parameter rule")
        return float(env[node.id])
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_eval_node(node.left, env), _eval_node(node.right, env))
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _eval_node(node.operand, env)
        return -v if isinstance(node.op, ast.USub) else v
    if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
            and node.func.id in _FUNCS and len(node.args) == 1 and not node.keywords):
        return float(_FUNCS[node.func.id](_eval_node(node.args[0], env)))
    raise ConfigError(f"unsupported syntax in parameter rule: {ast.dump(node)}")


class ParamRule:
    """Arithmetic expression in ``N`` such as ``"N**2"`` or ``"2*N + 1"``.

    Only numbers, ``N``, ``+ - * / **`` and ``sqrt log exp floor ceil`` are
    accepted; numbers are also accepted directly.
    """

    def __init__(self, expr):
        if isinstance(expr, (int, float)):
            expr = repr(float(expr))
        if not isinstance(expr, str):
            raise ConfigError(f"parameter rule must be a string or number, got {expr!r}")
        self.expr = expr
        try:
            self._tree = ast.parse(expr, mode="eval")
        except SyntaxError as exc:
            raise ConfigError(f"cannot parse parameter rule {expr!r}: {exc.msg}") from None
        _eval_node(self._tree, {"N": 1.0})

    def __call__(self, N):
        return _eval_node(self._tree, {"N": float(N)})

    def __repr__(self):
        return f"ParamRule({self.expr!r})"

    def __eq__(self, other):
        return isinstance(other, ParamRule) and other.expr == self.expr


def _rule(v):
    return None if v is None else (v if isinstance(v, ParamRule) else ParamRule(v))


# ------------------------------------------------------- starting vectors


def gauss_rule(m, tol=1e-12):
    """Discrete law matching the moments ``m_0..m_L`` (Chebyshev + Golub-Welsch).

    Uses ``n = floor((L+1)/2)`` atoms, fewer when the recurrence stops early
    (a law with fewer atoms, or moments that are not positive definite
    beyond some order).

    Returns
    -------
    nodes, weights : ndarray
    """
    m = m.values if isinstance(m, MomentVector) else np.asarray(m, dtype=float)
    n = (m.size) // 2
    if n < 1:
        return np.array([0.0]), np.array([1.0])
    sig_prev = np.zeros(2 * n)
    sig = m[:2 * n].astype(float).copy()
    alpha = [m[1] / m[0]]
    beta = [m[0]]
    for k in range(1, n):
        new = np.zeros(2 * n)
        for l in range(k, 2 * n - k):
            new[l] = sig[l + 1] - alpha[k - 1] * sig[l] - beta[k - 1] * sig_prev[l]
        if not new[k] > tol * max(1.0, abs(sig[k - 1])):
            break
        alpha.append(new[k + 1] / new[k] - sig[k] / sig[k - 1])
        beta.append(new[k] / sig[k - 1])
        sig_prev, sig = sig, new
    k = len(alpha)
    if k == 1:
        return np.array([alpha[0]]), np.array([1.0])
    nodes, vecs = eigh_tridiagonal(np.array(alpha), np.sqrt(np.array(beta[1:k])))
    w = vecs[0] ** 2
    return nodes, w / w.sum()


@dataclass
class StartInfo:
    clipped: int
    nodes: np.ndarray
    weights: np.ndarray


def make_start(N, inst, mu0, L_match=12, mode="quantile", rng=None, clip_tol=1e-8,
               return_info=False):
    """Particles whose rescaled empirical law approximates ``mu0``.

    A discrete law matching ``mu0``'s moments up to ``L_match`` is split
    into ``N`` quantile slots (slot ``i`` takes the atom containing level
    ``(i+1/2)/N``), then mapped back by ``x = b + y/a``. Points within
    ``clip_tol`` (in rescaled units) outside the domain are clipped and
    counted; farther ones mean the window does not fit.

    Parameters
    ----------
    inst : RegimeInstance
    mu0 : MomentVector or measure expression
    mode : {"quantile", "iid"}
        ``iid`` samples the atoms with ``rng`` instead.

    Raises
    ------
    DomainError
        When the start window exits the domain.
    """
    mu = evaluate(mu0, int(min(L_match, available_order(mu0))))
    nodes, w = gauss_rule(mu)
    order = np.argsort(nodes)
    nodes, w = nodes[order], w[order]
    if mode == "quantile":
        levels = (np.arange(N) + 0.5) / N
    elif mode == "iid":
        rng = rng if rng is not None else np.random.default_rng(0)
        levels = rng.random(N)
    else:
        raise ConfigError(f"unknown start mode {mode!r}")
    cw = np.cumsum(w)
    cw[-1] = 1.0
    y = np.sort(nodes[np.minimum(np.searchsorted(cw, levels, side="right"), nodes.size - 1)])
    x = inst.b + y / inst.a
    lo, hi = (-1.0, 1.0) if inst.domain is Domain.CompactAlcove else (1.0, np.inf)
    out = (x < lo) | (x > hi)
    excess = np.maximum(lo - x, x - hi) * inst.a
    if np.any(excess[out] > clip_tol):
        raise DomainError(
            f"start window exits the domain at N={N}: rescaled excess {float(np.max(excess)):.3g}"
        )
    x = np.sort(np.clip(x, lo, hi))
    state = ParticleState(inst.domain, x)
    if return_info:
        return state, StartInfo(int(np.sum(out)), nodes, w)
    return state


# ----------------------------------------------------------- experiments


@dataclass
class Experiment:
    """One limit experiment over a list of ``N``.

    ``p``, ``q``, ``s`` and ``b`` are rules in ``N``; ``s`` and ``b`` are
    needed only by the local regimes. Times in ``t_list`` are on the
    regime clock (raw time times ``s_N``).
    """

    regime: ScalingRegime
    N_list: tuple
    p: ParamRule
    q: ParamRule
    mu0: object
    t_list: tuple
    L: int = 6
    dynamics: str = "frozen"
    kappa: float = 1.0
    s: ParamRule = None
    b: ParamRule = None
    seed: int = 0
    replicas: int = 1
    dt: float = None
    scheme: str = "EulerProjected"
    start: str = "quantile"
    L_match: int = 12
    integrator: dict = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.regime, ScalingRegime):
            self.regime = ScalingRegime(self.regime)
        self.p, self.q, self.s, self.b = _rule(self.p), _rule(self.q), _rule(self.s), _rule(self.b)
        self.N_list = tuple(int(n) for n in self.N_list)
        self.t_list = tuple(float(t) for t in self.t_list)
        if not self.N_list or any(n < 1 for n in self.N_list):
            raise ConfigError("N_list must hold positive integers")
        if any(t < 0 for t in self.t_list):
            raise ConfigError("t_list must be nonnegative")
        if self.dynamics not in ("frozen", "stochastic"):
            raise ConfigError(f"dynamics must be 'frozen' or 'stochastic', not {self.dynamics!r}")
        if int(self.L) < 1:
            raise ConfigError("L must be >= 1")
        Scheme.parse(self.scheme)
        IntegratorOptions(**self.integrator)

    def instance(self, N):
        return self.regime.instance(self.p(N), self.q(N), N,
                                    s=None if self.s is None else self.s(N),
                                    b=None if self.b is None else self.b(N))

    def instances(self):
        return [self.instance(N) for N in self.N_list]

    def validate(self):
        """Regime hypotheses along ``N_list``; raises before any dynamics."""
        try:
            inst = self.instances()
        except JacobiFlowError as exc:
            raise DomainError(f"invalid parameters: {exc}") from None
        problems = self.regime.validate(inst, check_constants=False)
        if problems:
            raise DomainError("regime hypotheses fail: " + "; ".join(problems))
        return self.regime.constant_problems(inst)

    def mu0_moments(self, L):
        return evaluate(self.mu0, L)

    def to_config(self):
        consts = {k: ("inf" if isinstance(v, float) and math.isinf(v) else v)
                  for k, v in self.regime.constants.items()}
        return {
            "schema": SCHEMA, "regime": self.regime.regime.value, "constants": consts,
            "dynamics": self.dynamics, "kappa": self.kappa, "N_list": list(self.N_list),
            "p": self.p.expr, "q": self.q.expr,
            "s": None if self.s is None else self.s.expr,
            "b": None if self.b is None else self.b.expr,
            "mu0": expr_to_json(self.mu0), "t_list": list(self.t_list), "L": self.L,
            "seed": self.seed, "replicas": self.replicas, "dt": self.dt, "scheme": self.scheme,
            "start": self.start, "L_match": self.L_match, "integrator": dict(self.integrator),
        }

    @classmethod
    def from_config(cls, cfg):
        """Build from a config mapping (strict keys, ``"schema": 1``)."""
        cfg = dict(cfg)
        if cfg.pop("schema", None) != SCHEMA:
            raise ConfigError(f"config needs \"schema\": {SCHEMA}")
        allowed = set(cls.__dataclass_fields__) | {"constants", "constant_tol"}
        extra = set(cfg) - allowed
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        for key in ("regime", "N_list", "p", "q", "mu0", "t_list"):
            if key not in cfg:
                raise ConfigError(f"missing config key {key!r}")
        consts = {k: float(v) for k, v in (cfg.pop("constants", None) or {}).items()}
        try:
            reg = ScalingRegime(cfg.pop("regime"), consts, float(cfg.pop("constant_tol", 0.25)))
        except NotImplementedError as exc:
            raise DomainError(str(exc)) from None
        mu0 = cfg.pop("mu0")
        cfg["mu0"] = mu0 if not isinstance(mu0, dict) else expr_from_json(mu0)
        try:
            return cls(regime=reg, **cfg)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


def rel_scale(pred):
    """Normaliser ``max(|m_l|, sqrt(m_2)^l)`` of each predicted moment."""
    v = pred.values if isinstance(pred, MomentVector) else np.asarray(pred)
    sig = math.sqrt(max(v[2], 0.0)) if v.size > 2 else 1.0
    if sig == 0.0:
        sig = 1.0
    return np.maximum(np.abs(v), sig ** np.arange(v.size))


@dataclass
class ConvergenceReport:
    """Long-format table of empirical vs predicted moments.

    ``rows`` are dicts with ``N, t, l, empirical, predicted, gap, rel_gap``
    and, for stochastic runs, ``se`` (standard error of the replica mean)
    and ``max_path_rel_gap``.
    """

    rows: list
    config: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    stats: dict = field(default_factory=dict)

    COLUMNS = ("N", "t", "l", "empirical", "predicted", "gap", "rel_gap", "se",
               "max_path_rel_gap")

    def select(self, N=None, t=None, l=None):
        return [r for r in self.rows if (N is None or r["N"] == N) and (t is None or r["t"] == t)
                and (l is None or r["l"] == l)]

    def N_values(self):
        return sorted({r["N"] for r in self.rows})

    def gap_series(self, t, l, key="rel_gap"):
        return [next(r[key] for r in self.select(N, t, l)) for N in self.N_values()]

    def decay_orders(self):
        """Least-squares slope of ``log rel_gap`` against ``log N`` per ``(t, l)``."""
        Ns = np.array(self.N_values(), dtype=float)
        out = {}
        for t, l in sorted({(r["t"], r["l"]) for r in self.rows}):
            g = np.array(self.gap_series(t, l))
            if Ns.size < 2 or np.any(g <= 0):
                out[(t, l)] = None
                continue
            out[(t, l)] = float(-np.polyfit(np.log(Ns), np.log(g), 1)[0])
        return out

    def monotone(self, floor=1e-12):
        """Whether each ``(t, l)`` gap is nonincreasing along ``N``.

        Gaps below ``floor`` count as zero, so rounding noise around an
        exactly matched moment does not register as growth.
        """
        out = {}
        for t, l in sorted({(r["t"], r["l"]) for r in self.rows}):
            g = [v if v >= floor else 0.0 for v in self.gap_series(t, l)]
            out[(t, l)] = all(b <= a for a, b in zip(g, g[1:]))
        return out

    def max_rel_gap(self, N=None, lmax=None):
        N = self.N_values()[-1] if N is None else N
        vals = [r["rel_gap"] for r in self.select(N=N) if lmax is None or r["l"] <= lmax]
        return max(vals) if vals else 0.0

    def to_csv(self, fh=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.COLUMNS)
        for r in self.rows:
            out = []
            for c in self.COLUMNS:
                v = r.get(c)
                if v is None:
                    out.append("")
                elif isinstance(v, (int, np.integer)) and not isinstance(v, bool):
                    out.append(str(int(v)))
                else:
                    out.append(f"{float(v):.17g}")
            w.writerow(out)
        text = buf.getvalue()
        if fh is not None:
            fh.write(text)
        return text

    def to_json(self):
        dec = self.decay_orders()
        mono = self.monotone()
        per = [{"t": t, "l": l, "decay_order": dec[(t, l)], "monotone": mono[(t, l)]}
               for (t, l) in sorted(dec)]
        return {"schema": SCHEMA, "config": self.config, "warnings": self.warnings,
                "stats": self.stats, "max_rel_gap_at_largest_N": self.max_rel_gap(),
                "per_t_l": per,
                "rows": [{k: v for k, v in r.items() if v is not None} for r in self.rows]}


def _run_one(e: Experiment, N: int):
    """Rows and warnings for one ``N``."""
    inst = e.instance(N)
    L = int(e.L)
    mu_start = e.mu0_moments(int(min(max(e.L_match, L), available_order(e.mu0))))
    mu_pred = e.mu0_moments(L)
    x0, info = make_start(N, inst, mu_start, L_match=e.L_match, mode=e.start,
                          rng=np.random.default_rng([e.seed, N]), return_info=True)
    notes = []
    if info.clipped:
        notes.append(f"N={N}: {info.clipped} start points clipped into the domain")
    ts = np.array(e.t_list)
    raw = inst.raw_time(ts)
    rows = []
    stats = {}
    try:
        if e.dynamics == "frozen":
            tr = solve_from_boundary(x0, inst.p, inst.q, inst.domain, times=raw,
                                     opts=IntegratorOptions(**e.integrator))
            idx = {float(t): i for i, t in enumerate(tr.times)}
            emp = np.array([empirical_moments(tr.coords[idx[float(r)]], inst.a, inst.b, L).values
                            for r in raw])
            se = per_path = None
            stats = {k: v for k, v in tr.stats.items() if isinstance(v, (int, float, str))}
        else:
            cfg = SdeConfig(ModelParams(inst.p, inst.q, N, kappa=e.kappa), scheme=e.scheme,
                            dt=e.dt, seed=e.seed, replicas=e.replicas)
            paths = simulate(x0, cfg, float(np.max(raw)), inst.domain, times=raw)
            pos = {float(t): i for i, t in enumerate(paths[0].times)}
            X = np.stack([pa.coords for pa in paths])  # (R, T, N)
            M = empirical_moments_batch(X, inst.a, inst.b, L)  # (R, T, L+1)
            sel = [pos[float(r)] for r in raw]
            M = M[:, sel]
            emp = M.mean(axis=0)
            R = M.shape[0]
            se = M.std(axis=0, ddof=1) / math.sqrt(R) if R > 1 else np.zeros_like(emp)
            per_path = M
            stats = {k: (float(v) if isinstance(v, (np.floating,)) else v)
                     for k, v in paths[0].stats.items()}
    except JacobiFlowError as exc:
        exc.args = (f"N={N}: {exc}",)
        raise
    for j, t in enumerate(e.t_list):
        pred = predict_limit(e.regime.regime, t, mu_pred, inst.constants, L)
        scale = rel_scale(pred)
        for l in range(1, L + 1):
            g = abs(emp[j, l] - pred[l])
            row = {"N": N, "t": t, "l": l, "empirical": float(emp[j, l]),
                   "predicted": float(pred[l]), "gap": float(g), "rel_gap": float(g / scale[l]),
                   "se": None, "max_path_rel_gap": None}
            if se is not None:
                row["se"] = float(se[j, l])
                row["max_path_rel_gap"] = float(np.max(np.abs(per_path[:, j, l] - pred[l]))
                                                / scale[l])
            rows.append(row)
    return rows, notes, stats


def _run_one_packed(args):
    cfg, N = args
    return _run_one(Experiment.from_config(cfg), N)


def run_experiment(e: Experiment, jobs=1) -> ConvergenceReport:
    """Run ``e`` for every ``N`` and score against the limit prediction.

    Hypothesis violations abort before any dynamics. With ``jobs > 1`` the
    ``N`` values run in worker processes; results are gathered in
    ``N_list`` order so the report does not depend on scheduling.
    """
    const_notes = e.validate()
    cfg = e.to_config()
    if jobs > 1 and len(e.N_list) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_run_one_packed, [(cfg, N) for N in e.N_list]))
    else:
        results = [_run_one(e, N) for N in e.N_list]
    rows, notes, stats = [], list(const_notes), {}
    for N, (r, n, st) in zip(e.N_list, results):
        rows.extend(r)
        notes.extend(n)
        stats[str(N)] = st
    for msg in notes:
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return ConvergenceReport(rows=rows, config=cfg, warnings=notes, stats=stats)


# ------------------------------------------------------------ zero limits


def zeros_limit_experiment(kind, N_list, p_rule, q_rule, L=6, C=None) -> ConvergenceReport:
    """Moments of rescaled Jacobi zeros against their limit law.

    Parameters
    ----------
    kind : {"WignerZeros", "MPZeros"}
        Wigner zeros use the stationary Wigner scaling with target
        ``semicircle(4 (1+C)^{-3/2})``; MP zeros the stationary MP scaling
        with target ``MP(p_hat, 2)``. Constants are the finite-N plug-ins.
    C : float, optional
        Declared ``C``; ``inf`` runs the mirrored problem.
    """
    p_rule, q_rule = _rule(p_rule), _rule(q_rule)
    if kind == "WignerZeros":
        reg = ScalingRegime(Regime.WignerStationary, {} if C is None else {"C": float(C)})
    elif kind == "MPZeros":
        reg = ScalingRegime(Regime.MPStationary)
    else:
        raise ConfigError(f"unknown zeros kind {kind!r}")
    rows = []
    for N in N_list:
        inst = reg.instance(p_rule(N), q_rule(N), N)
        z = jacobi_zeros(JacobiParams.from_model(N, inst.p, inst.q))
        emp = empirical_moments(z, inst.a, inst.b, L)
        if kind == "WignerZeros":
            pred = semicircle_moments(4.0 * (1.0 + inst.constants["C"]) ** -1.5, L)
        else:
            pred = mp_moments(inst.constants["p_hat"], 2.0, L)
        scale = rel_scale(pred)
        for l in range(1, L + 1):
            g = abs(emp[l] - pred[l])
            rows.append({"N": int(N), "t": math.inf, "l": l, "empirical": float(emp[l]),
                         "predicted": float(pred[l]), "gap": float(g),
                         "rel_gap": float(g / scale[l]), "se": None, "max_path_rel_gap": None})
    cfg = {"schema": SCHEMA, "kind": kind, "N_list": [int(n) for n in N_list],
           "p": p_rule.expr, "q": q_rule.expr, "L": L, "C": None if C is None else str(C)}
    return ConvergenceReport(rows=rows, config=cfg)
