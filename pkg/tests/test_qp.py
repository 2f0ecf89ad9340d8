import numpy as np
import pytest

from oracles import kkt_enumeration_qp, qp_dual_objective, random_qp
from sparseport.qp import QpProblem, farkas_value, solve_qp


def test_single_equality():
    res = solve_qp(QpProblem(Q=2 * np.eye(1), c=np.zeros(1), A=np.ones((1, 1)), lo=np.ones(1), hi=np.ones(1)))
    assert res.optimal
    assert res.x == pytest.approx([1.0])
    assert res.row_duals == pytest.approx([2.0])


def test_symmetric_simplex():
    # min x1^2 + x2^2 on the simplex: Q = 2I
    prob = QpProblem(Q=2 * np.eye(2), c=np.zeros(2), A=np.ones((1, 2)), lo=np.ones(1), hi=np.ones(1),
                     lb=np.zeros(2))
    res = solve_qp(prob)
    assert res.x == pytest.approx([0.5, 0.5])
    assert res.row_duals == pytest.approx([1.0])
    assert res.bound_duals == pytest.approx([0.0, 0.0], abs=1e-12)


def test_contradictory_bounds_certificate():
    prob = QpProblem(Q=np.eye(2), c=np.zeros(2), lb=np.array([2.0, -np.inf]), ub=np.array([1.0, np.inf]))
    res = solve_qp(prob)
    assert res.status == "infeasible"
    residual, value = farkas_value(prob, res)
    assert residual <= 1e-12
    assert value > 0


def test_infeasible_rows_certificate():
    # x1 + x2 = 1, x >= 0 and x1 + x2 >= 2
    A = np.array([[1.0, 1.0], [1.0, 1.0]])
    prob = QpProblem(Q=np.eye(2), c=np.zeros(2), A=A, lo=np.array([1.0, 2.0]), hi=np.array([1.0, np.inf]),
                     lb=np.zeros(2))
    res = solve_qp(prob)
    assert res.status == "infeasible"
    residual, value = farkas_value(prob, res)
    assert residual <= 1e-10 and value > 1e-9


def test_unconstrained():
    Q = np.array([[2.0, 0.5], [0.5, 1.0]])
    c = np.array([1.0, -1.0])
    res = solve_qp(QpProblem(Q=Q, c=c))
    assert res.x == pytest.approx(np.linalg.solve(Q, -c))


def test_warns_nothing_on_empty_rows():
    res = solve_qp(QpProblem(Q=np.eye(3), c=-np.ones(3), A=np.zeros((0, 3)), lo=np.zeros(0), hi=np.zeros(0)))
    assert res.x == pytest.approx(np.ones(3))


def test_matches_active_set_enumeration():
    rng = np.random.default_rng(11)
    checked = 0
    for _ in range(200):
        n = int(rng.integers(1, 6))
        m = int(rng.integers(0, 4))
        Q, c, A, lo, hi, lb, ub = random_qp(rng, n, m, m_eq=int(rng.integers(0, m + 1)) if m else 0)
        ref, _ = kkt_enumeration_qp(Q, c, A, lo, hi, lb, ub)
        prob = QpProblem(Q, c, A, lo, hi, lb, ub)
        res = solve_qp(prob)
        if not np.isfinite(ref):
            assert res.status == "infeasible"
            residual, value = farkas_value(prob, res)
            assert residual <= 1e-8 * (1 + value) and value > 0
            continue
        checked += 1
        assert res.optimal
        assert res.objective == pytest.approx(ref, abs=1e-7 * (1 + abs(ref)))
        stat = Q @ res.x + c - A.T @ res.row_duals - res.bound_duals
        assert np.max(np.abs(stat)) <= 1e-7
        # strong duality from the returned multipliers
        assert qp_dual_objective(prob, res) == pytest.approx(res.objective, abs=1e-6 * max(1.0, abs(ref)))
    assert checked > 100


def test_dual_signs():
    # lower side binding gives a positive dual, upper side a negative one
    prob = QpProblem(Q=np.eye(1), c=np.zeros(1), A=np.ones((1, 1)), lo=np.array([1.0]), hi=np.array([2.0]))
    assert solve_qp(prob).row_duals[0] == pytest.approx(1.0)
    prob = QpProblem(Q=np.eye(1), c=np.array([-5.0]), A=np.ones((1, 1)), lo=np.array([1.0]), hi=np.array([2.0]))
    assert solve_qp(prob).row_duals[0] == pytest.approx(-3.0)
