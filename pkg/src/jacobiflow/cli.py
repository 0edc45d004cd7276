"""Command-line front end.

Every subcommand reads one JSON config (``"schema": 1``), prints a JSON
summary on stdout and, with ``--out``, writes its artifacts into a fresh
directory. Exit codes: 0 success, 1 domain error, 2 config error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import shutil
import sys
import tempfile
from importlib import metadata

import numpy as np

from . import kernels
from .detflow import IntegratorOptions, solve_from_boundary
from .errors import ConfigError, JacobiFlowError
from .freeprob import (evaluate, expr_from_json, moments_to_cumulants, predict_limit)
from .harness import SCHEMA, Experiment, run_experiment, zeros_limit_experiment
from .jacobi_poly import JacobiParams, jacobi_zeros
from .model import Domain, ModelParams
from .moments import MomentVector, empirical_moments, moment_ode_oracle
from .sde import SdeConfig, simulate

log = logging.getLogger("jacobiflow")

SUBCOMMANDS = ("ode-run", "sde-run", "zeros", "limit-check", "moment-oracle", "freeprob-eval")


def _version():
    try:
        return metadata.version("jacobiflow")
    except metadata.PackageNotFoundError:
        return "unknown"


def _fmt(v):
    return f"{float(v):.17g}"


def _clean(obj):
    """JSON-safe copy: numpy scalars to floats, inf/nan to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    if cfg.get("schema") != SCHEMA:
        raise ConfigError(f"config needs \"schema\": {SCHEMA}")
    return cfg


def _take(cfg, required, optional):
    """Split a config into known keys; unknown keys are an error."""
    extra = set(cfg) - set(required) - set(optional) - {"schema"}
    if extra:
        raise ConfigError(f"unknown config keys: {sorted(extra)}")
    missing = [k for k in required if k not in cfg]
    if missing:
        raise ConfigError(f"missing config keys: {missing}")
    out = {k: cfg[k] for k in required}
    out.update({k: cfg.get(k, v) for k, v in optional.items()})
    return out


def _times(c):
    if c.get("times") is not None:
        return np.asarray(c["times"], dtype=float)
    n = int(c.get("n_times") or 11)
    return np.linspace(0.0, float(c["t_end"]), n)


def _integrator(d):
    try:
        return IntegratorOptions(**(d or {}))
    except TypeError as exc:
        raise ConfigError(f"bad integrator options: {exc}") from None


def _trajectory_csv(times, coords, replica=None):
    N = coords.shape[-1]
    head = ("replica," if replica is not None else "") + "t," + ",".join(
        f"x_{i + 1}" for i in range(N))
    lines = [head]
    for t, row in zip(times, coords):
        pre = f"{replica}," if replica is not None else ""
        lines.append(pre + ",".join(_fmt(v) for v in (t, *row)))
    return "\n".join(lines) + "\n"


# ------------------------------------------------------------ commands


def cmd_ode_run(cfg, args):
    c = _take(cfg, ("domain", "p", "q", "x0", "t_end"),
              {"times": None, "n_times": None, "method": "auto", "integrator": None})
    dom = Domain.parse(c["domain"])
    opts = _integrator(c["integrator"])
    x0 = np.asarray(c["x0"], dtype=float)
    ModelParams(float(c["p"]), float(c["q"]), x0.size)
    if args.dry_run:
        return {"valid": True}, {}
    tr = solve_from_boundary(x0, c["p"], c["q"], dom, times=_times(c), opts=opts,
                             method=c["method"])
    summary = {"final": tr.coords[-1].tolist(), "stats": tr.stats, "N": int(x0.size)}
    return summary, {"trajectory.csv": _trajectory_csv(tr.times, tr.coords)}


def cmd_sde_run(cfg, args):
    c = _take(cfg, ("domain", "p", "q", "kappa", "x0", "t_end"),
              {"times": None, "n_times": None, "dt": None, "scheme": "EulerProjected",
               "replicas": 1, "seed": 0, "clock": "rescaled", "moments": None})
    dom = Domain.parse(c["domain"])
    x0 = np.asarray(c["x0"], dtype=float)
    seed = args.seed if args.seed is not None else int(c["seed"])
    # the unrescaled process at time t is the rescaled one at time kappa*t
    if c["clock"] not in ("rescaled", "unrescaled"):
        raise ConfigError("clock must be 'rescaled' or 'unrescaled'")
    scale = 1.0 / float(c["kappa"]) if c["clock"] == "unrescaled" else 1.0
    try:
        cfg_sde = SdeConfig(ModelParams(float(c["p"]), float(c["q"]), x0.size,
                                        kappa=float(c["kappa"])),
                            scheme=c["scheme"], dt=c["dt"], seed=seed, replicas=int(c["replicas"]))
    except ValueError as exc:
        if isinstance(exc, JacobiFlowError):
            raise
        raise ConfigError(str(exc)) from None
    if args.dry_run:
        return {"valid": True}, {}
    times = _times(c) / scale
    paths = simulate(x0, cfg_sde, float(times[-1]), dom, times=times)
    parts = [_trajectory_csv(pa.times * scale, pa.coords, pa.replica_id) for pa in paths]
    text = parts[0] + "".join(part.split("\n", 1)[1] for part in parts[1:])
    summary = {"replicas": len(paths), "stats": paths[0].stats}
    mom = c["moments"]
    if mom is not None:
        mc = _take(mom, ("L",), {"a": 1.0, "b": 0.0})
        per = np.array([[empirical_moments(pa.coords[i], mc["a"], mc["b"], int(mc["L"])).values
                         for i in range(len(pa.times))] for pa in paths])
        summary["mean_moments"] = [{"t": float(t * scale), "moments": per[:, i].mean(0).tolist()}
                                   for i, t in enumerate(paths[0].times)]
    return summary, {"trajectory.csv": text}


def cmd_zeros(cfg, args):
    if cfg is None:
        if args.n is None or args.alpha is None or args.beta is None:
            raise ConfigError("zeros needs --config or all of --n --alpha --beta")
        z = jacobi_zeros(JacobiParams(args.n, args.alpha, args.beta))
        if args.dry_run:
            return {"valid": True}, {}
        return {"zeros": z.tolist()}, {
            "zeros.csv": "i,x\n" + "".join(f"{i + 1},{_fmt(v)}\n" for i, v in enumerate(z))}
    c = _take(cfg, ("kind", "N_list", "p", "q"), {"L": 6, "C": None})
    C = None if c["C"] is None else float(c["C"])
    if args.dry_run:
        return {"valid": True}, {}
    rep = zeros_limit_experiment(c["kind"], c["N_list"], c["p"], c["q"], int(c["L"]), C=C)
    return rep.to_json(), {"report.csv": rep.to_csv(), "report.json": _dump(rep.to_json())}


def cmd_limit_check(cfg, args):
    cfg = dict(cfg)
    if args.seed is not None:
        cfg["seed"] = args.seed
    e = Experiment.from_config(cfg)
    if args.dry_run:
        notes = e.validate()
        return {"valid": True, "warnings": notes}, {}
    rep = run_experiment(e, jobs=args.jobs)
    js = rep.to_json()
    return js, {"report.csv": rep.to_csv(), "report.json": _dump(js)}


def cmd_moment_oracle(cfg, args):
    c = _take(cfg, ("p", "q", "N", "a", "b", "t_grid", "L"),
              {"domain": "compact", "s": 1.0, "x0": None, "S0": None, "compare": False})
    dom = Domain.parse(c["domain"])
    N, L = int(c["N"]), int(c["L"])
    if (c["x0"] is None) == (c["S0"] is None):
        raise ConfigError("give exactly one of x0 and S0")
    if c["compare"] and c["x0"] is None:
        raise ConfigError("compare needs x0")
    if args.dry_run:
        return {"valid": True}, {}
    grid = np.asarray(c["t_grid"], dtype=float)
    if c["x0"] is not None:
        x0 = np.asarray(c["x0"], dtype=float)
        S0 = empirical_moments(x0, c["a"], c["b"], L)
    else:
        S0 = MomentVector(c["S0"])
    res = moment_ode_oracle(S0, c["p"], c["q"], c["a"], c["b"], N, grid, dom, c["s"])
    rows = ["t,l,oracle" + (",particles,gap" if c["compare"] else "")]
    sup = 0.0
    emp = None
    if c["compare"]:
        tr = solve_from_boundary(x0, c["p"], c["q"], dom, times=grid / c["s"])
        emp = [empirical_moments(x, c["a"], c["b"], L).values for x in tr.coords]
    for i, t in enumerate(grid):
        for l in range(L + 1):
            line = f"{_fmt(t)},{l},{_fmt(res[i][l])}"
            if emp is not None:
                g = abs(emp[i][l] - res[i][l])
                sup = max(sup, g)
                line += f",{_fmt(emp[i][l])},{_fmt(g)}"
            rows.append(line)
    summary = {"final": res[-1].values.tolist()}
    if emp is not None:
        summary["sup_gap"] = sup
    return summary, {"report.csv": "\n".join(rows) + "\n"}


def cmd_freeprob_eval(cfg, args):
    c = _take(cfg, ("L",), {"expr": None, "regime": None, "t": None, "mu0": None,
                            "constants": None})
    L = int(c["L"])
    if (c["expr"] is None) == (c["regime"] is None):
        raise ConfigError("give exactly one of expr and regime")
    if c["expr"] is not None:
        expr = expr_from_json(c["expr"])
        if args.dry_run:
            return {"valid": True}, {}
        mu = evaluate(expr, L)
    else:
        if c["t"] is None or c["mu0"] is None:
            raise ConfigError("regime evaluation needs t and mu0")
        mu0 = evaluate(expr_from_json(c["mu0"]), L)
        consts = {k: float(v) for k, v in (c["constants"] or {}).items()}
        if args.dry_run:
            return {"valid": True}, {}
        mu = predict_limit(c["regime"], float(c["t"]), mu0, consts, L)
    kap = moments_to_cumulants(mu)
    rows = ["l,moment,cumulant"] + [f"{l},{_fmt(mu[l])},{_fmt(kap[l])}" for l in range(L + 1)]
    return ({"moments": mu.values.tolist(), "cumulants": kap.tolist(), "support": mu.support},
            {"report.csv": "\n".join(rows) + "\n"})


COMMANDS = {
    "ode-run": cmd_ode_run,
    "sde-run": cmd_sde_run,
    "zeros": cmd_zeros,
    "limit-check": cmd_limit_check,
    "moment-oracle": cmd_moment_oracle,
    "freeprob-eval": cmd_freeprob_eval,
}


def _dump(obj):
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def write_outputs(out, files, meta, force):
    """Write ``files`` into ``out`` atomically (temp dir + rename)."""
    out = os.path.abspath(out)
    if os.path.exists(out) and not force:
        raise ConfigError(f"output directory {out} exists; pass --force to replace it")
    parent = os.path.dirname(out) or "."
    os.makedirs(parent, exist_ok=True)
    tmp = tempfile.mkdtemp(prefix=".jacobiflow-", dir=parent)
    try:
        for name, text in {**files, "meta.json": _dump(meta)}.items():
            with open(os.path.join(tmp, name), "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        if os.path.exists(out):
            shutil.rmtree(out)
        os.rename(tmp, out)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise


def build_parser():
    ap = argparse.ArgumentParser(prog="jacobiflow",
                                 description="Frozen and stochastic Jacobi particle systems.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--out", help="output directory (created atomically)")
        sp.add_argument("--seed", type=int, help="seed override (unsigned 64-bit)")
        sp.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                        help="worker processes (default: available CPUs)")
        sp.add_argument("--dry-run", action="store_true", help="validate only")
        sp.add_argument("--force", action="store_true", help="replace an existing --out")
        sp.add_argument("-v", "--verbose", action="count", default=0)
        if name == "zeros":
            sp.add_argument("--n", type=int)
            sp.add_argument("--alpha", type=float)
            sp.add_argument("--beta", type=float)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        if args.seed is not None and not 0 <= args.seed < 2 ** 64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        cfg = load_config(args.config) if args.config else None
        if cfg is None and args.command != "zeros":
            raise ConfigError(f"{args.command} needs --config")
        log.info("running %s (backend %s)", args.command, kernels.BACKEND)
        summary, files = COMMANDS[args.command](cfg, args)
        if args.out and not args.dry_run:
            meta = {"schema": SCHEMA, "command": args.command, "config": cfg,
                    "seed_override": args.seed, "version": _version(),
                    "backend": kernels.BACKEND}
            write_outputs(args.out, files, meta, args.force)
            log.info("wrote %s", ", ".join(sorted(files) + ["meta.json"]))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (JacobiFlowError, NotImplementedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, TypeError, KeyError) as exc:
        # malformed values that never reached the numerics
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    sys.stdout.write(_dump(summary))
    return 0


if __name__ == "__main__":
    sys.exit(main())
