"""Acceptance criteria, one test each; a PASS/FAIL/BLOCKED line per criterion
is printed in the terminal summary.

The OR-library files are looked up in ``$SPARSEPORT_ORLIB_DIR`` and then in
``data/orlib`` next to the repository root.
"""
import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

from sparseport.bnc import SolveOptions, solve
from sparseport.cli import run
from sparseport.enumerate import enumerate_optimum
from sparseport.heuristic import warm_start
from sparseport.instance import (
    Instance,
    build_regression_form,
    load_orlibrary,
    min_return_threshold,
    save_instance,
    with_min_return,
)
from sparseport.oracle import evaluate, make_optimality_cut
from sparseport.relaxation import check_support_recovery, closed_form_solve, inout_bound
from sparseport.synthetic import acceptance_suite, diagonal_instance, dominant_instance, orlibrary_like

SUITE = acceptance_suite()


def _orlib_dir():
    for cand in (os.environ.get("SPARSEPORT_ORLIB_DIR"), Path(__file__).parents[1] / "data" / "orlib"):
        if cand and all((Path(cand) / f"port{i}.txt").is_file() for i in range(1, 6)):
            return Path(cand)
    return None


def _outcome(ok):
    return "PASS" if ok else "FAIL"


@pytest.fixture(scope="module")
def optima():
    return [enumerate_optimum(inst).value for inst in SUITE]


def test_criterion_1_enumeration_equivalence(tmp_path, acceptance):
    t0 = time.perf_counter()
    worst = 0.0
    for i, inst in enumerate(SUITE):
        path = tmp_path / f"{inst.name}.json"
        save_instance(inst, path)
        code_s, solved = run(["solve", "--instance", str(path)])
        code_e, enum = run(["enumerate", "--instance", str(path)])
        assert code_s == code_e == 0
        worst = max(worst, abs(solved["value_regularized"] - enum["value"]))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-6 and elapsed < 120
    acceptance(1, "solve matches enumeration on 50 instances", _outcome(ok),
               f"max diff {worst:.2e}, {elapsed:.1f} s")
    assert worst <= 1e-6
    assert elapsed < 120


def test_criterion_2_cut_validity(acceptance):
    rng = np.random.default_rng(99)
    violations = pairs = 0
    worst = -math.inf
    for inst in SUITE[:20]:
        rf = build_regression_form(inst)
        done = 0
        while done < 50:
            z, z2 = (_random_point(rng, inst.n, inst.k) for _ in range(2))
            cert, other = evaluate(rf, inst, z), evaluate(rf, inst, z2)
            if not (cert.optimal and other.optimal):
                continue
            done += 1
            excess = make_optimality_cut(cert, rf, inst)(z2) - other.value
            worst = max(worst, excess)
            violations += excess > 1e-7
        pairs += done
    acceptance(2, "cut validity on 1000 pairs", _outcome(violations == 0 and pairs == 1000),
               f"{violations} violations, max excess {worst:.2e}")
    assert pairs == 1000 and violations == 0


def _random_point(rng, n, k):
    if rng.random() < 0.5:
        z = np.zeros(n)
        z[rng.choice(n, size=int(rng.integers(1, k + 1)), replace=False)] = 1.0
        return z
    z = rng.uniform(0.05, 1.0, size=n)
    return np.minimum(z * k / z.sum(), 1.0) if z.sum() > k else z


def test_criterion_3_bound_sandwich(optima, acceptance):
    failures = []
    recovered = 0
    for inst, opt in zip(SUITE, optima):
        rf = build_regression_form(inst)
        res = inout_bound(rf, inst)
        heur = warm_start(rf, inst)
        upper = math.inf if heur is None else heur[1]
        if not (res.theta_socp <= opt + 1e-9 and opt <= upper + 1e-9):
            failures.append(inst.name)
        if res.certificate is not None and check_support_recovery(res.certificate, inst, rf)[0]:
            recovered += 1
            if abs(res.theta_socp - opt) > 1e-6:
                failures.append(inst.name + " (recovery)")
    acceptance(3, "relaxation <= optimum <= heuristic", _outcome(not failures),
               f"{recovered} recovery certificates; failures: {failures or 'none'}")
    assert not failures


def test_criterion_4_closed_form(acceptance):
    rng = np.random.default_rng(404)
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(3, 9))
        inst = diagonal_instance(rng, n, int(rng.integers(1, n + 1)), gamma=float(rng.choice([0.5, 1.0, 10.0])),
                                 sigma=float(rng.uniform(0.5, 2.0)))
        _, closed = closed_form_solve(inst)
        enum = enumerate_optimum(inst).value
        sol = solve(build_regression_form(inst), inst)
        worst = max(worst, abs(closed - enum), abs(closed - sol.value_regularized))
    acceptance(4, "closed form, enumeration and solve agree", _outcome(worst <= 1e-9), f"max diff {worst:.2e}")
    assert worst <= 1e-9


def test_criterion_5_polish_guarantee(acceptance):
    worst = -math.inf
    for gamma in (1.0, 10.0, 100.0):
        for inst in SUITE:
            inst = inst.with_changes(gamma=gamma)
            sol = solve(build_regression_form(inst), inst)
            ref = enumerate_optimum(inst, regularized=False).value
            worst = max(worst, sol.value_polished - ref - 1 / (2 * gamma))
    acceptance(5, "polished solution within 1/(2 gamma)", _outcome(worst <= 1e-8),
               f"max excess over the bound {worst:.2e}")
    assert worst <= 1e-8


def test_criterion_6_orlibrary(acceptance):
    d = _orlib_dir()
    if d is None:
        acceptance(6, "OR-library port1-port5 solve to gap 1e-6", "BLOCKED",
                   "data files not available; set SPARSEPORT_ORLIB_DIR")
        pytest.skip("OR-library files port1..port5 not found")
    details = []
    ok = True
    for i in range(1, 6):
        inst = load_orlibrary(d / f"port{i}.txt")
        inst = inst.with_changes(gamma=100 / math.sqrt(inst.n), kappa=1.0)
        for k in (5, 10, 20):
            sol = solve(build_regression_form(inst), inst.with_changes(k=k), SolveOptions(time_limit=120))
            cuts = sol.cuts_optimality + sol.cuts_feasibility
            good = sol.gap <= 1e-6 and sol.wall_time <= 60 and cuts <= 200
            ok &= good
            details.append(f"port{i} k={k}: gap {sol.gap:.1e} {sol.wall_time:.1f}s {cuts} cuts")
    acceptance(6, "OR-library port1-port5 solve to gap 1e-6", _outcome(ok), "; ".join(details))
    assert ok


def test_criterion_6_synthetic_stand_in(acceptance):
    """Same grid and limits as criterion 6 on generated data with the OR-library sizes.

    This does not replace criterion 6; it exercises the identical pipeline
    while the real files are unavailable.
    """
    details = []
    ok = True
    for i, n in enumerate((31, 85, 89, 98, 225)):
        mu, sd, corr = orlibrary_like(np.random.default_rng(100 + i), n)
        inst = Instance(mu=mu, k=5, gamma=100 / math.sqrt(n), kappa=1.0, cov=corr * np.outer(sd, sd))
        rf = build_regression_form(inst)
        for k in (5, 10, 20):
            sol = solve(rf, inst.with_changes(k=k), SolveOptions(time_limit=120))
            cuts = sol.cuts_optimality + sol.cuts_feasibility
            good = sol.status == "optimal" and sol.gap <= 1e-6 and sol.wall_time <= 60 and cuts <= 200
            ok &= good
            if not good:
                details.append(f"n={n} k={k}: {sol.status} gap {sol.gap:.1e} {sol.wall_time:.1f}s {cuts} cuts")
    acceptance("6s", "synthetic stand-in for the OR-library grid", _outcome(ok), "; ".join(details) or "15 runs")
    assert ok


def test_criterion_7_figure_target(acceptance):
    d = _orlib_dir()
    if d is None:
        acceptance(7, "port2 relaxation bound near 0.009288", "BLOCKED", "data files not available")
        pytest.skip("OR-library file port2 not found")
    inst = load_orlibrary(d / "port2.txt")
    inst = inst.with_changes(k=5, kappa=0.0, gamma=100 / math.sqrt(inst.n))
    inst = with_min_return(inst, min_return_threshold(inst))
    res = inout_bound(build_regression_form(inst), inst)
    rel = abs(res.theta_socp - 0.009288) / 0.009288
    # a target rather than a gate: the outcome is reported, the run only has to be sound
    acceptance(7, "port2 relaxation bound near 0.009288", "PASS" if rel <= 0.05 else "MISS",
               f"bound {res.theta_socp:.6g}, relative difference {rel:.1%}")
    assert math.isfinite(res.theta_socp)


def test_criterion_8_single_cut_short_circuit(acceptance):
    inst = dominant_instance()
    sol = solve(build_regression_form(inst), inst)
    ok = sol.status == "optimal" and sol.nodes == 0 and sol.cuts_optimality <= 5 and sol.recovered
    acceptance(8, "dominant asset ends at the root", _outcome(ok),
               f"{sol.nodes} nodes, {sol.cuts_optimality} cuts, recovered {sol.recovered}")
    assert ok


def test_criterion_9_inout_limit(optima, acceptance):
    worst_diff = 0.0
    above = 0
    for inst, opt in zip(SUITE, optima):
        rf = build_regression_form(inst)
        stab = inout_bound(rf, inst, max_iter=200, max_cuts=200, recover=False).theta_socp
        kel = inout_bound(rf, inst, max_iter=2000, max_cuts=2000, kelley=True, recover=False).theta_socp
        worst_diff = max(worst_diff, abs(stab - kel))
        above += stab > opt + 1e-9
    ok = worst_diff <= 1e-4 and above == 0
    acceptance(9, "in-out limit equals Kelley limit", _outcome(ok),
               f"max diff {worst_diff:.2e}, {above} bounds above the optimum")
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
