"""Strictly convex quadratic programs with two-sided rows and variable bounds."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels

STATUS_NAMES = {
    kernels.QP_OPTIMAL: "optimal",
    kernels.QP_INFEASIBLE: "infeasible",
    kernels.QP_ITERATION_LIMIT: "iteration_limit",
}


@dataclass
class QpProblem:
    """``min 0.5 x'Qx + c'x  s.t.  lo <= A x <= hi,  lb <= x <= ub``.

    Rows with ``lo == hi`` are treated as equalities.  Infinite entries in
    ``lo``/``hi``/``lb``/``ub`` mean the side is absent.  ``Q`` must be
    positive definite.
    """

    Q: np.ndarray
    c: np.ndarray
    A: np.ndarray | None = None
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None
    lb: np.ndarray | None = None
    ub: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.Q.shape[0]


@dataclass
class QpResult:
    status: str
    x: np.ndarray
    objective: float
    row_duals: np.ndarray
    bound_duals: np.ndarray
    iterations: int
    # Farkas certificate, columns (lower side, upper side), nonnegative off
    # equality rows; empty unless infeasible.
    row_certificate: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    bound_certificate: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def _assemble(prob: QpProblem):
    n = prob.n
    A = np.zeros((0, n)) if prob.A is None else np.atleast_2d(np.asarray(prob.A, float))
    m = A.shape[0]
    lo = np.full(m, -np.inf) if prob.lo is None else np.asarray(prob.lo, float)
    hi = np.full(m, np.inf) if prob.hi is None else np.asarray(prob.hi, float)
    lb = np.full(n, -np.inf) if prob.lb is None else np.asarray(prob.lb, float)
    ub = np.full(n, np.inf) if prob.ub is None else np.asarray(prob.ub, float)

    rows, rhs, bvar, bsign = [], [], [], []
    # (kind, index, sign): kind 0 = general row, 1 = variable bound
    owner = []
    eq = np.isfinite(lo) & (lo == hi)
    for i in np.flatnonzero(eq):
        rows.append(A[i])
        rhs.append(lo[i])
        bvar.append(-1)
        bsign.append(0.0)
        owner.append((0, i, 1.0))
    meq = len(rows)
    for i in range(m):
        if eq[i]:
            continue
        if np.isfinite(lo[i]):
            rows.append(A[i])
            rhs.append(lo[i])
            bvar.append(-1)
            bsign.append(0.0)
            owner.append((0, i, 1.0))
        if np.isfinite(hi[i]):
            rows.append(-A[i])
            rhs.append(-hi[i])
            bvar.append(-1)
            bsign.append(0.0)
            owner.append((0, i, -1.0))
    eye = np.eye(n)
    for j in range(n):
        if np.isfinite(lb[j]):
            rows.append(eye[j])
            rhs.append(lb[j])
            bvar.append(j)
            bsign.append(1.0)
            owner.append((1, j, 1.0))
        if np.isfinite(ub[j]):
            rows.append(-eye[j])
            rhs.append(-ub[j])
            bvar.append(j)
            bsign.append(-1.0)
            owner.append((1, j, -1.0))
    C = np.array(rows, dtype=float).reshape(len(rows), n)
    return (
        C,
        np.array(rhs, dtype=float),
        meq,
        np.array(bvar, dtype=np.int64),
        np.array(bsign, dtype=float),
        owner,
        m,
    )


def _scatter(values, owner, m, n):
    row = np.zeros(m)
    bound = np.zeros(n)
    for v, (kind, idx, sign) in zip(values, owner):
        if kind == 0:
            row[idx] += sign * v
        else:
            bound[idx] += sign * v
    return row, bound


def _scatter_sides(values, owner, m, n):
    row = np.zeros((m, 2))
    bound = np.zeros((n, 2))
    for v, (kind, idx, sign) in zip(values, owner):
        side = 0 if sign > 0 else 1
        if kind == 0:
            row[idx, side] += v
        else:
            bound[idx, side] += v
    return row, bound


def farkas_value(prob: QpProblem, res: QpResult) -> tuple[float, float]:
    """``(residual, value)`` of an infeasibility certificate.

    A valid certificate has ``residual ~ 0`` (the row combination vanishes)
    and ``value > 0``.
    """
    n = prob.n
    C, b, _, _, _, owner, m = _assemble(prob)
    y = np.zeros(len(owner))
    for k, (kind, idx, sign) in enumerate(owner):
        side = 0 if sign > 0 else 1
        y[k] = (res.row_certificate if kind == 0 else res.bound_certificate)[idx, side]
    return float(np.max(np.abs(C.T @ y), initial=0.0)), float(b @ y)


def solve_qp(prob: QpProblem, tol: float = 1e-10, max_iter: int | None = None) -> QpResult:
    """Solve ``prob`` with the dual active-set kernel.

    The duals satisfy ``Q x + c - A' row_duals - bound_duals = 0``; a
    positive row dual means the lower side is binding, a negative one the
    upper side.
    """
    Q = np.ascontiguousarray(prob.Q, dtype=float)
    c = np.ascontiguousarray(prob.c, dtype=float)
    n = prob.n
    C, b, meq, bvar, bsign, owner, m = _assemble(prob)
    if max_iter is None:
        max_iter = 200 * max(C.shape[0], 1) + 50
    code, x, u, _, iters, cert = kernels.gi_solve(
        Q, c, np.ascontiguousarray(C), b, meq, bvar, bsign, tol, max_iter
    )
    status = STATUS_NAMES[int(code)]
    row_duals, bound_duals = _scatter(u, owner, m, n)
    res = QpResult(
        status=status,
        x=x,
        objective=float(0.5 * x @ Q @ x + c @ x),
        row_duals=row_duals,
        bound_duals=bound_duals,
        iterations=int(iters),
    )
    if status == "infeasible":
        res.row_certificate, res.bound_certificate = _scatter_sides(cert, owner, m, n)
        res.objective = np.inf
    return res
