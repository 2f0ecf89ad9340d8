"""Compare the numba kernels with the pure-numpy fallback.

Each path runs in its own interpreter because the JIT switch is read at
import time::

    python benchmarks/bench_kernels.py            # both paths, side by side
    python benchmarks/bench_kernels.py --worker   # one path, JSON on stdout
"""
from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def _best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def worker(repeat: int) -> dict:
    from sparseport import build_regression_form, solve
    from sparseport._jit import JIT_ENABLED
    from sparseport.bnc import SolveOptions
    from sparseport.kernels import pivoted_cholesky
    from sparseport.lp import CutLP
    from sparseport.qp import QpProblem, solve_qp
    from sparseport.synthetic import acceptance_suite

    rng = np.random.default_rng(7)
    n = 40
    M = rng.normal(size=(n, n))
    Q = M @ M.T / n + np.eye(n)
    c = rng.normal(size=n)
    A = rng.normal(size=(10, n))
    qp = QpProblem(Q=Q, c=c, A=np.vstack([np.ones(n), A]), lo=np.r_[1.0, np.full(10, -0.5)],
                   hi=np.r_[1.0, np.full(10, 0.5)], lb=np.zeros(n), ub=np.full(n, np.inf))

    lp = CutLP(n, -10.0)
    lp.add_z_row(-np.ones(n), -5.0, kind="budget")
    for _ in range(60):
        z0 = rng.uniform(size=n)
        g = -rng.uniform(size=n)
        lp.add_z_row(-g, rng.uniform() - g @ z0, theta_coef=1.0, kind="optimality")

    S = Q[:30, :30] @ Q[:30, :30]
    suite = acceptance_suite(count=10)

    def full_solves():
        for inst in suite:
            solve(build_regression_form(inst), inst, SolveOptions())

    # first calls compile (or load the cache) and are not timed
    solve_qp(qp)
    lp.solve()
    pivoted_cholesky(S, 1e-12)
    full_solves()

    lp_fresh = lambda: (setattr(lp, "_W", None), lp.solve())  # noqa: E731
    return {
        "jit": JIT_ENABLED,
        "qp_40x11": _best_of(lambda: solve_qp(qp), repeat),
        "lp_40x60": _best_of(lp_fresh, repeat),
        "pivoted_cholesky_30": _best_of(lambda: pivoted_cholesky(S, 1e-12), repeat),
        "solve_suite_10": _best_of(full_solves, max(1, repeat // 5)),
    }


def main() -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--worker", action="store_true")
    p.add_argument("--repeat", type=int, default=10)
    args = p.parse_args()
    if args.worker:
        print(json.dumps(worker(args.repeat)))
        return 0
    results = {}
    for flag in ("1", "0"):
        env = dict(os.environ, SPARSEPORT_JIT=flag)
        out = subprocess.run([sys.executable, __file__, "--worker", "--repeat", str(args.repeat)],
                             env=env, capture_output=True, text=True, check=True)
        results[flag] = json.loads(out.stdout.strip().splitlines()[-1])
    keys = [k for k in results["1"] if k != "jit"]
    print(f"{'kernel':24s} {'numba [s]':>12s} {'numpy [s]':>12s} {'speedup':>9s}")
    for key in keys:
        a, b = results["1"][key], results["0"][key]
        print(f"{key:24s} {a:12.6f} {b:12.6f} {b / a if a > 0 else float('nan'):9.2f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
