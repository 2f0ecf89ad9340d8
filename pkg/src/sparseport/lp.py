"""Cut-model linear programs ``min theta`` over patterns ``z`` (and optional copies ``x``).

Variables are ordered ``[z (n), theta, x (n, optional)]``.  The model keeps
the dual simplex working set between solves: adding rows or moving bounds
leaves it dual feasible, so re-solves after a new cut or a branching
decision start from the previous vertex.
"""
from __future__ import annotations

import numpy as np

from . import kernels


class CutLP:
    """Growing LP ``min theta  s.t.  rows, box bounds on z, theta >= theta_lb``."""

    def __init__(self, n: int, theta_lb: float, with_x: bool = False):
        self.n = n
        self.with_x = with_x
        self.nv = 2 * n + 1 if with_x else n + 1
        self.theta = n
        self._rows: list[np.ndarray] = []
        self._rhs: list[float] = []
        self.kinds: list[str] = []
        self.z_lo = np.zeros(n)
        self.z_hi = np.ones(n)
        self.theta_lb = float(theta_lb)
        self._W: np.ndarray | None = None
        self._cache = None
        self.iterations = 0

    # bound rows occupy fixed slots in front of the general rows
    def _bound_block(self):
        n, nv = self.n, self.nv
        rows, rhs, bvar, bsign = [], [], [], []
        eye = np.eye(nv)
        for j in range(n):
            rows.append(eye[j])
            rhs.append(self.z_lo[j])
            bvar.append(j)
            bsign.append(1.0)
        for j in range(n):
            rows.append(-eye[j])
            rhs.append(-self.z_hi[j])
            bvar.append(j)
            bsign.append(-1.0)
        rows.append(eye[self.theta])
        rhs.append(self.theta_lb)
        bvar.append(self.theta)
        bsign.append(1.0)
        if self.with_x:
            for j in range(n):
                rows.append(eye[n + 1 + j])
                rhs.append(0.0)
                bvar.append(n + 1 + j)
                bsign.append(1.0)
        return rows, rhs, bvar, bsign

    @property
    def n_bound_rows(self) -> int:
        return 2 * self.n + 1 + (self.n if self.with_x else 0)

    def add_row(self, coef: np.ndarray, rhs: float, kind: str = "row") -> None:
        """Add ``coef @ v >= rhs`` over the full variable vector."""
        coef = np.asarray(coef, dtype=float)
        if coef.size != self.nv:
            raise ValueError("row length does not match the variable count")
        self._rows.append(coef)
        self._rhs.append(float(rhs))
        self.kinds.append(kind)
        self._cache = None

    def add_z_row(self, coef_z: np.ndarray, rhs: float, theta_coef: float = 0.0, kind: str = "row") -> None:
        coef = np.zeros(self.nv)
        coef[: self.n] = coef_z
        coef[self.theta] = theta_coef
        self.add_row(coef, rhs, kind)

    def count(self, kind: str) -> int:
        return sum(1 for k in self.kinds if k == kind)

    def set_bounds(self, z_lo: np.ndarray, z_hi: np.ndarray) -> None:
        self.z_lo = np.asarray(z_lo, dtype=float).copy()
        self.z_hi = np.asarray(z_hi, dtype=float).copy()
        self._cache = None

    def set_theta_lb(self, value: float) -> None:
        self.theta_lb = float(value)
        self._cache = None

    def _assemble(self):
        if self._cache is None:
            rows, rhs, bvar, bsign = self._bound_block()
            rows += self._rows
            rhs += self._rhs
            bvar += [-1] * len(self._rows)
            bsign += [0.0] * len(self._rows)
            self._cache = (
                np.ascontiguousarray(np.array(rows, dtype=float).reshape(len(rows), self.nv)),
                np.array(rhs, dtype=float),
                np.array(bvar, dtype=np.int64),
                np.array(bsign, dtype=float),
            )
        return self._cache

    def _initial_basis(self) -> np.ndarray:
        # lower bounds of z, theta and x: multipliers (0, 1, 0) price out theta
        base = list(range(self.n)) + [2 * self.n]
        if self.with_x:
            base += list(range(2 * self.n + 1, 3 * self.n + 1))
        return np.array(base, dtype=np.int64)

    def solve(self, tol: float = 1e-9, max_iter: int = 100000):
        """Returns ``(status, v)`` with status ``optimal`` or ``infeasible``."""
        C, b, bvar, bsign = self._assemble()
        cost = np.zeros(self.nv)
        cost[self.theta] = 1.0
        W = self._initial_basis() if self._W is None else self._W
        status, v, W, _, iters = kernels.dual_lp(C, b, cost, bvar, bsign, W, tol, max_iter)
        self.iterations += int(iters)
        if status == kernels.LP_ITERATION_LIMIT:
            # restart from the trivial basis once before giving up
            status, v, W, _, iters = kernels.dual_lp(
                C, b, cost, bvar, bsign, self._initial_basis(), tol, max_iter
            )
            self.iterations += int(iters)
        if status == kernels.LP_OPTIMAL:
            self._W = W
            return "optimal", v
        if status == kernels.LP_INFEASIBLE:
            self._W = W
            return "infeasible", v
        self._W = None
        return "iteration_limit", v
