"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py --sizes 10 100 1000 --repeat 5
"""

import argparse
import json
import sys
import timeit

import numpy as np

from jacobiflow import _fallback

try:
    from jacobiflow import _kernels
except ImportError:
    _kernels = None


def cases(N, R):
    rng = np.random.default_rng(N)
    x = np.sort(rng.uniform(-1, 1, N))
    X = np.sort(rng.uniform(-1, 1, (R, N)), axis=1)
    return {
        "drift": lambda m: m.drift(x, 7.0, 5.0, 1.0),
        "drift_batch": lambda m: m.drift_batch(X, 7.0, 5.0, 1.0),
        "log_pair_sum": lambda m: m.log_pair_sum(x),
    }


def best_time(fn, repeat):
    t = timeit.Timer(fn)
    n, _ = t.autorange()
    return min(t.repeat(repeat=repeat, number=n)) / n


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[10, 100, 400, 1000])
    ap.add_argument("--replicas", type=int, default=50, help="rows of the batched drift")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", action="store_true", help="print JSON instead of a table")
    args = ap.parse_args(argv)
    if _kernels is None:
        print("compiled extension not built; only the numpy path is available", file=sys.stderr)
    rows = []
    for N in args.sizes:
        for name, fn in cases(N, args.replicas).items():
            row = {"N": N, "kernel": name, "numpy_s": best_time(lambda: fn(_fallback), args.repeat)}
            if _kernels is not None:
                row["cython_s"] = best_time(lambda: fn(_kernels), args.repeat)
                row["speedup"] = row["numpy_s"] / row["cython_s"]
            rows.append(row)
    if args.json:
        print(json.dumps(rows, indent=1))
        return 0
    print(f"{'N':>6} {'kernel':<13} {'numpy':>11} {'cython':>11} {'speedup':>8}")
    for r in rows:
        cy = f"{r['cython_s'] * 1e6:9.1f}us" if "cython_s" in r else f"{'-':>11}"
        sp = f"{r['speedup']:7.1f}x" if "speedup" in r else f"{'-':>8}"
        print(f"{r['N']:>6} {r['kernel']:<13} {r['numpy_s'] * 1e6:9.1f}us {cy} {sp}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
