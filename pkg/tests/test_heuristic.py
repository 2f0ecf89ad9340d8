import numpy as np
import pytest

from sparseport.bnc import solve
from sparseport.enumerate import enumerate_optimum
from sparseport.heuristic import HeuristicConfig, next_pattern, warm_start
from sparseport.instance import Instance, build_regression_form
from sparseport.oracle import evaluate
from sparseport.synthetic import acceptance_suite, dominant_instance


def test_dominant_asset_default_seed():
    inst = dominant_instance()
    rf = build_regression_form(inst)
    pattern, value = warm_start(rf, inst)
    assert pattern.support.tolist() == [0]
    assert value == pytest.approx(enumerate_optimum(inst).value, abs=1e-9)


def test_symmetric_value():
    inst = Instance(mu=np.zeros(3), k=2, gamma=1.0, cov=np.eye(3))
    pattern, value = warm_start(build_regression_form(inst), inst)
    assert value == pytest.approx(0.5)
    assert pattern.support.size == 2


def test_unsatisfiable_row_gives_none():
    inst = Instance(mu=np.full(4, 0.1), k=2, gamma=1.0, cov=np.eye(4)).add_row(np.full(4, 0.1), lower=0.5)
    assert warm_start(build_regression_form(inst), inst) is None


def test_deterministic_for_fixed_seed():
    inst = acceptance_suite(count=3)[2]
    rf = build_regression_form(inst)
    a = warm_start(rf, inst, HeuristicConfig(seed=17))
    b = warm_start(rf, inst, HeuristicConfig(seed=17))
    assert a[0].support.tolist() == b[0].support.tolist() and a[1] == b[1]


def test_config_validation():
    for bad in (dict(starts=0), dict(T=0), dict(L=0.0)):
        with pytest.raises(ValueError):
            HeuristicConfig(**bad)


def test_step_keeps_largest_scores():
    rng = np.random.default_rng(41)
    for _ in range(50):
        n, k = 8, int(rng.integers(1, 5))
        w = rng.uniform(0, 1, size=n)
        gi = rng.uniform(0.5, 2, size=n)
        z = np.zeros(n)
        z[rng.choice(n, size=k, replace=False)] = 1
        L = float(rng.uniform(0.1, 3))
        nxt = next_pattern(w, z, gi, L, k)
        score = np.abs(-np.where(z > 0, gi * w, 0) + (-0.5 * gi * w * w) / L)
        chosen = np.flatnonzero(nxt)
        assert chosen.size == k
        assert score[chosen].min() >= np.delete(score, chosen).max(initial=-np.inf)


def test_upper_bound_and_feasible_on_suite():
    for inst in acceptance_suite(count=12):
        rf = build_regression_form(inst)
        out = warm_start(rf, inst)
        opt = solve(rf, inst)
        if out is None:
            continue
        pattern, value = out
        assert evaluate(rf, inst, pattern.z).optimal
        assert value >= opt.value_regularized - 1e-7
