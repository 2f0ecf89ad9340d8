"""Value and subgradient of the support function ``f(z)`` via the inner dual.

For a pattern ``z`` in ``[0, 1]^n``, ``f(z)`` is the optimum of the
portfolio QP with the ridge term on asset ``i`` scaled by ``1/z_i`` (assets
with ``z_i = 0`` are excluded).  ``f`` is convex, and the dual multipliers of
the restricted QP give both its value and a subgradient.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .instance import Instance, RegressionForm
from .qp import QpProblem, solve_qp

SUPPORT_THRESHOLD = 1e-9


class OracleError(RuntimeError):
    """The restricted QP did not finish (iteration cap)."""


@dataclass(frozen=True)
class SparsityPattern:
    z: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "z", np.asarray(self.z, dtype=float).ravel())

    @property
    def kind(self) -> str:
        return "binary" if is_binary(self.z) else "fractional"

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.z > SUPPORT_THRESHOLD)


def is_binary(z, tol: float = 1e-9) -> bool:
    z = np.asarray(z, dtype=float)
    return bool(np.all(np.minimum(np.abs(z), np.abs(1.0 - z)) <= tol))


def _as_array(z) -> np.ndarray:
    if isinstance(z, SparsityPattern):
        return z.z
    return np.asarray(z, dtype=float).ravel()


@dataclass
class DualCertificate:
    """Dual solution of the restricted QP, completed to all ``n`` assets.

    ``value`` is ``f(z)`` in the units of the original objective and
    ``grad`` a subgradient of ``f`` at ``z``.  ``x`` is the primal optimum
    (zero off the support).
    """

    status: str
    z: np.ndarray
    value: float
    alpha: np.ndarray
    w: np.ndarray
    beta_l: np.ndarray
    beta_u: np.ndarray
    lam: float
    rho: np.ndarray
    x: np.ndarray
    grad: np.ndarray
    qp_objective: float = np.nan
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"

    def dual_slack(self, rf: RegressionForm, inst: Instance) -> np.ndarray:
        """``w - (X'alpha + A'(beta_l - beta_u) + lam + rho - d)``; nonnegative when dual feasible."""
        v = rf.X.T @ self.alpha + inst.A.T @ (self.beta_l - self.beta_u) + self.lam + self.rho - rf.d
        return self.w - v


@dataclass
class Cut:
    """Optimality cut ``theta >= offset + grad'(z - origin)`` or the no-good
    ``coef'z >= rhs`` excluding a binary origin."""

    kind: str
    origin: np.ndarray
    offset: float = 0.0
    grad: np.ndarray = field(default_factory=lambda: np.zeros(0))
    pareto: bool = False
    coef: np.ndarray = field(default_factory=lambda: np.zeros(0))
    rhs: float = 0.0

    def __call__(self, z) -> float:
        """Cut value at ``z`` (optimality) or its left-hand side minus ``rhs``."""
        z = _as_array(z)
        if self.kind == "optimality":
            return float(self.offset + self.grad @ (z - self.origin))
        return float(self.coef @ z - self.rhs)


def _split(beta: np.ndarray):
    return np.maximum(beta, 0.0), np.maximum(-beta, 0.0)


def _finite_dot(weights: np.ndarray, bounds: np.ndarray) -> float:
    on = weights > 0
    return float(weights[on] @ bounds[on]) if np.any(on) else 0.0


def _infeasible(n: int, m: int, r: int, z: np.ndarray, iters: int = 0) -> DualCertificate:
    return DualCertificate(
        status="primal_infeasible", z=z, value=np.inf, alpha=np.zeros(r), w=np.zeros(n),
        beta_l=np.zeros(m), beta_u=np.zeros(m), lam=0.0, rho=np.zeros(n), x=np.zeros(n),
        grad=np.zeros(n), iterations=iters,
    )


def evaluate(rf: RegressionForm, inst: Instance, z) -> DualCertificate:
    """Solve the restricted QP at ``z`` and complete its dual.

    Raises :class:`OracleError` if the QP hits its iteration cap.
    """
    z = _as_array(z)
    n, m, r = inst.n, inst.m, rf.rank
    S = np.flatnonzero(z > SUPPORT_THRESHOLD)
    if S.size == 0:
        return _infeasible(n, m, r, z)
    XS = rf.X[:, S]
    zS = z[S]
    G = XS.T @ XS + np.diag(1.0 / (rf.gamma_i[S] * zS))
    c = -inst.kappa * inst.mu[S]
    A = np.vstack([inst.A[:, S], np.ones((1, S.size))])
    lo = np.append(inst.lower, 1.0)
    hi = np.append(inst.upper, 1.0)
    if inst.x_min is not None:
        lb = zS * inst.x_min[S]
    else:
        lb = np.zeros(S.size)
    res = solve_qp(QpProblem(Q=G, c=c, A=A, lo=lo, hi=hi, lb=lb), tol=1e-11)
    if res.status == "infeasible":
        return _infeasible(n, m, r, z, res.iterations)
    if res.status != "optimal":
        raise OracleError(f"restricted QP stopped with status {res.status}")

    x = np.zeros(n)
    x[S] = res.x
    alpha = rf.y - XS @ res.x
    beta = res.row_duals[:m]
    lam = float(res.row_duals[m])
    rho = np.zeros(n)
    if inst.x_min is not None:
        on = inst.x_min[S] > 0
        rho[S[on]] = np.maximum(res.bound_duals[on], 0.0)
    beta_l, beta_u = _split(beta)
    v = rf.X.T @ alpha + inst.A.T @ beta + lam + rho - rf.d
    w = np.maximum(v, 0.0)
    value = (
        -0.5 * np.sum(rf.gamma_i * z * w * w)
        - 0.5 * alpha @ alpha
        + rf.y @ alpha
        + lam
        + _finite_dot(beta_l, inst.lower)
        - _finite_dot(beta_u, inst.upper)
        - rf.c0
    )
    if inst.x_min is not None:
        value += float(np.sum(rho * z * inst.x_min))
        grad = -0.5 * rf.gamma_i * w * w + rho * inst.x_min
    else:
        grad = -0.5 * rf.gamma_i * w * w
    return DualCertificate(
        status="optimal", z=z, value=float(value), alpha=alpha, w=w, beta_l=beta_l,
        beta_u=beta_u, lam=lam, rho=rho, x=x, grad=grad, qp_objective=res.objective,
        iterations=res.iterations,
    )


def is_pareto_point(z, k: int) -> bool:
    z = _as_array(z)
    return bool(np.all(z > 0) and np.all(z < 1) and z.sum() < k)


def make_optimality_cut(cert: DualCertificate, rf: RegressionForm | None = None,
                        inst: Instance | None = None, z=None) -> Cut:
    """Affine underestimator of ``f`` built at the certificate's pattern."""
    if not cert.optimal:
        raise ValueError("optimality cuts need an optimal certificate")
    origin = cert.z if z is None else _as_array(z)
    pareto = inst is not None and is_pareto_point(origin, inst.k)
    return Cut(kind="optimality", origin=origin.copy(), offset=cert.value, grad=cert.grad.copy(), pareto=pareto)


def make_feasibility_cut(z) -> Cut:
    """No-good cut ``sum_{z_i=1} (1 - z_i) + sum_{z_i=0} z_i >= 1``."""
    z = _as_array(z)
    if not is_binary(z):
        raise ValueError("feasibility cuts need a binary pattern")
    zb = np.round(z)
    coef = np.where(zb > 0.5, -1.0, 1.0)
    return Cut(kind="feasibility", origin=zb, coef=coef, rhs=1.0 - zb.sum())


def check_single_cut_optimality(cert: DualCertificate, z=None, tol: float = 1e-8) -> bool:
    """True when the cut at a binary ``z`` alone proves ``z`` optimal.

    Inactive assets must carry ``w_i = 0`` (zero subgradient there), and
    active ones a nonpositive subgradient; the latter always holds without
    minimum investments.
    """
    if not cert.optimal:
        return False
    z = cert.z if z is None else _as_array(z)
    on = z > 0.5
    if np.any(cert.w[~on] > tol):
        return False
    return bool(np.all(cert.grad[on] <= tol))


def lipschitz_gap_bound(cert: DualCertificate, z, z2) -> float:
    """Upper bound on ``f(z) - f(z2)`` from the subgradient at ``z``."""
    z = _as_array(z)
    z2 = _as_array(z2)
    return float(-cert.grad @ (z2 - z))
