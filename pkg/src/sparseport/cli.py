"""Command-line front end: ``sparseport {solve,relax,heuristic,enumerate,bench}``."""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .bnc import SolveOptions, solve
from .enumerate import DEFAULT_SUPPORT_CAP, EnumerationCapExceeded, count_supports, enumerate_optimum
from .heuristic import HeuristicConfig, warm_start
from .instance import (
    Instance,
    ParseError,
    build_regression_form,
    load_diagonal,
    load_instance,
    load_orlibrary,
    load_returns_csv,
    load_x_min,
    min_return_threshold,
    with_min_return,
)
from .relaxation import inout_bound

EXIT_OK = 0
EXIT_LIMIT = 2
EXIT_INFEASIBLE = 3
EXIT_USAGE = 64

TRACE_COLUMNS = ("elapsed_s", "nodes", "cuts", "incumbent", "bound")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.9g}"


def _num(v):
    """Round for reports: 9 significant digits, infinities as strings."""
    if v is None:
        return None
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_num(x) for x in v]
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if math.isnan(v):
        return "nan"
    return float(f"{v:.9g}")


def _on_off(text: str) -> bool:
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected on or off")
    return text == "on"


def _gamma_arg(text: str):
    if text in ("auto", "auto1000"):
        return text
    try:
        g = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("expected a number, auto or auto1000") from None
    if not g > 0:
        raise argparse.ArgumentTypeError("gamma must be positive")
    return g


def _min_return_arg(text: str):
    if text in ("none", "auto"):
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("expected none, auto or a number") from None


def _add_instance_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--instance", required=True, help="instance file")
    p.add_argument("--format", choices=("canonical", "orlib", "csv"), default=None,
                   help="file format (default: from the extension)")
    p.add_argument("--k", type=int, default=None, help="sparsity budget")
    p.add_argument("--gamma", type=_gamma_arg, default=None,
                   help="ridge parameter: a number, auto (100/sqrt(n)) or auto1000 (1000/sqrt(n))")
    p.add_argument("--sigma", type=float, default=None, help="risk weight")
    p.add_argument("--kappa", type=float, default=None, help="return weight")
    p.add_argument("--min-return", type=_min_return_arg, default="none",
                   help="none, auto (30%% between the min-variance and max-return portfolios) or a level")
    p.add_argument("--x-min", default=None, metavar="PATH", help="minimum investments, one per line")
    p.add_argument("--diag", default="none", help="none, gershgorin or a diagonal file")
    p.add_argument("--rank", type=int, default=None, help="CSV: covariance rank")
    p.add_argument("--holding-scale", type=float, default=1.0, help="CSV: periods per holding period")
    p.add_argument("--drop-outliers", action="store_true", help="CSV: drop periods with a move above 20%%")
    p.add_argument("--seed", type=int, default=0, help="heuristic seed")
    p.add_argument("--report", default=None, metavar="PATH", help="write a JSON report")


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--warm-start", type=_on_off, default=True, metavar="{on,off}")
    p.add_argument("--root-inout", choices=("auto", "on", "off"), default="auto")
    p.add_argument("--node-inout", type=_on_off, default=False, metavar="{on,off}")
    p.add_argument("--copy-vars", choices=("auto", "on", "off"), default="auto")
    p.add_argument("--eps", type=float, default=1e-6, help="optimality tolerance")
    p.add_argument("--time-limit", type=float, default=None, help="seconds")
    p.add_argument("--node-limit", type=int, default=None)
    p.add_argument("--trace", default=None, metavar="PATH", help="write a CSV convergence trace")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sparseport", description="Certifiably optimal sparse portfolio selection.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    p = sub.add_parser("solve", help="branch-and-cut to proven optimality")
    _add_instance_flags(p)
    _add_solver_flags(p)

    p = sub.add_parser("relax", help="lower bound from the convex relaxation")
    _add_instance_flags(p)
    p.add_argument("--iterations", type=int, default=200)
    p.add_argument("--kelley", action="store_true", help="disable stabilisation")
    p.add_argument("--trace", default=None, metavar="PATH")

    p = sub.add_parser("heuristic", help="warm-start heuristic only")
    _add_instance_flags(p)
    p.add_argument("--starts", type=int, default=5)
    p.add_argument("--iterations", type=int, default=50)

    p = sub.add_parser("enumerate", help="exhaustive support enumeration")
    _add_instance_flags(p)
    p.add_argument("--cap", type=int, default=DEFAULT_SUPPORT_CAP, help="maximum number of supports")
    p.add_argument("--unregularized", action="store_true", help="drop the ridge term")

    p = sub.add_parser("bench", help="solve a grid of instances and tabulate the results")
    p.add_argument("--dir", required=True, help="directory of instance files")
    p.add_argument("--ks", default="5,10,20", help="comma-separated budgets")
    p.add_argument("--kappas", default="1", help="comma-separated return weights; 0 adds the min-return row")
    p.add_argument("--gamma", type=_gamma_arg, default="auto")
    p.add_argument("--out", default=None, metavar="PATH", help="CSV output (default stdout)")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    _add_solver_flags(p)
    return parser


def _detect_format(path: Path, given: str | None) -> str:
    if given:
        return given
    if path.suffix.lower() == ".json":
        return "canonical"
    if path.suffix.lower() == ".csv":
        return "csv"
    return "orlib"


def _resolve_gamma(g, n: int):
    if g == "auto":
        return 100.0 / math.sqrt(n)
    if g == "auto1000":
        return 1000.0 / math.sqrt(n)
    return g


def load_from_args(args) -> tuple[Instance, object]:
    """Instance with every override applied, plus the diagonal policy."""
    path = Path(args.instance)
    if not path.is_file():
        raise UsageError(f"instance file not found: {path}")
    kind = _detect_format(path, args.format)
    if kind == "canonical":
        inst = load_instance(path)
    elif kind == "orlib":
        inst = load_orlibrary(path)
    else:
        if args.rank is None:
            raise UsageError("--rank is required for CSV input")
        inst = load_returns_csv(path, rank=args.rank, holding_scale=args.holding_scale,
                                drop_outliers=args.drop_outliers)
    changes = {}
    if args.k is not None:
        changes["k"] = args.k
    if args.gamma is not None:
        changes["gamma"] = _resolve_gamma(args.gamma, inst.n)
    if args.sigma is not None:
        changes["sigma"] = args.sigma
    if args.kappa is not None:
        changes["kappa"] = args.kappa
    if args.x_min is not None:
        xp = Path(args.x_min)
        if not xp.is_file():
            raise UsageError(f"x-min file not found: {xp}")
        changes["x_min"] = load_x_min(xp, inst.n)
    if changes:
        inst = inst.with_changes(**changes)
    if args.min_return == "auto":
        inst = with_min_return(inst, min_return_threshold(inst))
    elif args.min_return != "none":
        inst = with_min_return(inst, float(args.min_return))
    boost = args.diag
    if boost not in ("none", "gershgorin"):
        dp = Path(boost)
        if not dp.is_file():
            raise UsageError(f"diagonal file not found: {dp}")
        boost = load_diagonal(dp, inst.n)
    return inst, boost


def _settings(inst: Instance, args, boost) -> dict:
    out = {
        "n": inst.n, "k": inst.k, "gamma": _num(inst.gamma), "sigma": _num(inst.sigma),
        "kappa": _num(inst.kappa), "rows": inst.m, "x_min": inst.x_min is not None,
        "diag": boost if isinstance(boost, str) else "file",
    }
    for key in ("warm_start", "root_inout", "node_inout", "copy_vars", "eps", "time_limit", "node_limit", "seed"):
        if hasattr(args, key):
            out[key] = getattr(args, key)
    return out


def _write_report(path, report: dict) -> None:
    if path:
        Path(path).write_text(json.dumps(report, indent=1))


def write_trace(path, rows) -> None:
    """CSV trace; the bound column is made nondecreasing and capped by the incumbent."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        best = -math.inf
        for elapsed, nodes, cuts, inc, bound in rows:
            best = max(best, bound)
            w.writerow([fmt(elapsed), fmt(nodes), fmt(cuts), fmt(inc), fmt(min(best, inc))])


def _options_from_args(args) -> SolveOptions:
    return SolveOptions(
        eps=args.eps, time_limit=args.time_limit, node_limit=args.node_limit,
        warm_start=args.warm_start, root_inout=args.root_inout, node_inout=args.node_inout,
        copy_vars=args.copy_vars, seed=getattr(args, "seed", None),
    )


def cmd_solve(args) -> tuple[int, dict]:
    inst, boost = load_from_args(args)
    rf = build_regression_form(inst, boost)
    sol = solve(rf, inst, _options_from_args(args))
    value = _num(sol.value_regularized)
    bound = _num(sol.lower_bound)
    gap = _num(value - bound) if sol.z_star is not None else "inf"
    report = {
        "command": "solve",
        "instance": inst.name or str(args.instance),
        "settings": _settings(inst, args, boost),
        "status": sol.status,
        "support": None if sol.z_star is None else [int(i) for i in np.flatnonzero(sol.z_star > 0.5)],
        "z_star": None if sol.z_star is None else _num(sol.z_star),
        "x_star": None if sol.x_star is None else _num(sol.x_star),
        "x_polished": None if sol.x_polished is None else _num(sol.x_polished),
        "value_regularized": value,
        "value_polished": _num(sol.value_polished),
        "lower_bound": bound,
        "gap": gap,
        "nodes": sol.nodes,
        "cuts_optimality": sol.cuts_optimality,
        "cuts_feasibility": sol.cuts_feasibility,
        "cuts_root": sol.cuts_root,
        "wall_time": _num(sol.wall_time),
        "relaxation_bound": _num(sol.theta_socp),
        "heuristic_value": _num(sol.heuristic_value),
        "recovered": sol.recovered,
        "single_cut_certified": sol.single_cut_certified,
        "trace": args.trace,
    }
    if args.trace:
        write_trace(args.trace, sol.trace)
    _write_report(args.report, report)
    print(f"status {sol.status}")
    if sol.z_star is not None:
        print("support " + " ".join(str(i) for i in report["support"]))
    for key in ("value_regularized", "value_polished", "lower_bound", "gap", "nodes",
                "cuts_optimality", "cuts_feasibility", "wall_time"):
        print(f"{key} {fmt(report[key]) if not isinstance(report[key], str) else report[key]}")
    if sol.status == "optimal":
        return EXIT_OK, report
    if sol.z_star is not None:
        return EXIT_LIMIT, report
    return EXIT_INFEASIBLE, report


def cmd_relax(args) -> tuple[int, dict]:
    inst, boost = load_from_args(args)
    rf = build_regression_form(inst, boost)
    res = inout_bound(rf, inst, max_iter=args.iterations, max_cuts=args.iterations, kelley=args.kelley)
    report = {
        "command": "relax",
        "instance": inst.name or str(args.instance),
        "settings": _settings(inst, args, boost),
        "theta_socp": _num(res.theta_socp),
        "upper_estimate": _num(res.upper_estimate),
        "recovered": res.recovered,
        "z_rounded": None if res.z_rounded is None else _num(res.z_rounded),
        "z_frac": _num(res.z_frac),
        "iterations": res.iterations,
        "status": res.status,
    }
    if args.trace:
        with open(args.trace, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("iteration", "lower_bound", "upper_estimate"))
            for row in res.trace:
                w.writerow([fmt(v) for v in row])
    _write_report(args.report, report)
    print(f"theta_socp {fmt(res.theta_socp)}")
    print(f"recovered {fmt(res.recovered)}")
    print(f"iterations {res.iterations}")
    if res.status == "oracle_infeasible" and not math.isfinite(res.upper_estimate):
        return EXIT_INFEASIBLE, report
    return EXIT_OK, report


def cmd_heuristic(args) -> tuple[int, dict]:
    inst, boost = load_from_args(args)
    rf = build_regression_form(inst, boost)
    cfg = HeuristicConfig(starts=args.starts, T=args.iterations, seed=args.seed)
    out = warm_start(rf, inst, cfg)
    report = {
        "command": "heuristic",
        "instance": inst.name or str(args.instance),
        "settings": _settings(inst, args, boost),
        "support": None if out is None else [int(i) for i in out[0].support],
        "value": None if out is None else _num(out[1]),
    }
    _write_report(args.report, report)
    if out is None:
        print("no feasible pattern found")
        return EXIT_INFEASIBLE, report
    print("support " + " ".join(str(i) for i in report["support"]))
    print(f"value {fmt(out[1])}")
    return EXIT_OK, report


def cmd_enumerate(args) -> tuple[int, dict]:
    inst, boost = load_from_args(args)
    report = {
        "command": "enumerate",
        "instance": inst.name or str(args.instance),
        "settings": _settings(inst, args, boost),
    }
    try:
        res = enumerate_optimum(inst, regularized=not args.unregularized, cap=args.cap)
    except EnumerationCapExceeded as exc:
        print(f"refusing: {exc.count} supports exceed the cap of {exc.cap}", file=sys.stderr)
        report["refused_supports"] = exc.count
        _write_report(args.report, report)
        return EXIT_USAGE, report
    report.update(
        {
            "value": _num(res.value),
            "support": None if res.support is None else list(res.support),
            "x": None if res.x is None else _num(res.x),
            "supports_checked": res.supports_checked,
        }
    )
    _write_report(args.report, report)
    if not res.feasible:
        print("infeasible")
        return EXIT_INFEASIBLE, report
    print("support " + " ".join(str(i) for i in res.support))
    print(f"value {fmt(res.value)}")
    return EXIT_OK, report


BENCH_COLUMNS = ("instance", "k", "kappa", "min_return", "gamma", "status", "value", "bound",
                 "gap", "nodes", "cuts", "time_s", "error")


def _bench_one(task):
    path, k, kappa, gamma_arg, opts = task
    row = dict.fromkeys(BENCH_COLUMNS, "")
    row.update(instance=Path(path).stem, k=k, kappa=kappa)
    try:
        inst = load_instance(path) if str(path).endswith(".json") else load_orlibrary(path)
        k_eff = min(k, inst.n)
        inst = inst.with_changes(k=k_eff, kappa=float(kappa), gamma=_resolve_gamma(gamma_arg, inst.n))
        r_bar = None
        if float(kappa) == 0.0:
            r_bar = min_return_threshold(inst)
            inst = with_min_return(inst, r_bar)
        rf = build_regression_form(inst)
        t0 = time.perf_counter()
        sol = solve(rf, inst, opts)
        row.update(
            k=k_eff, min_return="none" if r_bar is None else fmt(r_bar), gamma=fmt(inst.gamma),
            status=sol.status, value=fmt(sol.value_regularized), bound=fmt(sol.lower_bound),
            gap=fmt(sol.gap), nodes=sol.nodes, cuts=sol.cuts_optimality + sol.cuts_feasibility,
            time_s=fmt(time.perf_counter() - t0),
        )
    except Exception as exc:  # recorded per row, the grid keeps going
        row.update(status="error", error=f"{type(exc).__name__}: {exc}")
    return row


def cmd_bench(args) -> tuple[int, dict]:
    d = Path(args.dir)
    if not d.is_dir():
        raise UsageError(f"not a directory: {d}")
    files = sorted(p for p in d.iterdir() if p.is_file() and p.suffix.lower() in (".txt", ".json", ""))
    try:
        ks = [int(v) for v in args.ks.split(",") if v.strip()]
        kappas = [float(v) for v in args.kappas.split(",") if v.strip()]
    except ValueError:
        raise UsageError("--ks and --kappas take comma-separated numbers") from None
    opts = _options_from_args(args)
    tasks = [(str(p), k, kappa, args.gamma, opts) for p in files for kappa in kappas for k in ks]
    if args.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            rows = list(ex.map(_bench_one, tasks))
    else:
        rows = [_bench_one(t) for t in tasks]
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.DictWriter(out, fieldnames=BENCH_COLUMNS)
        w.writeheader()
        w.writerows(rows)
    finally:
        if args.out:
            out.close()
    return EXIT_OK, {"command": "bench", "rows": rows}


COMMANDS = {
    "solve": cmd_solve,
    "relax": cmd_relax,
    "heuristic": cmd_heuristic,
    "enumerate": cmd_enumerate,
    "bench": cmd_bench,
}


def run(argv=None) -> tuple[int, dict | None]:
    """Parse ``argv`` and run the command; returns ``(exit_code, report)``."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0), None
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ParseError) as exc:
        print(f"sparseport: error: {exc}", file=sys.stderr)
        return EXIT_USAGE, None
    except ValueError as exc:
        print(f"sparseport: invalid input: {exc}", file=sys.stderr)
        return EXIT_USAGE, None


def main(argv=None) -> int:
    code, _ = run(argv)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
