"""Lower bounds from the convex relaxation of the pattern set.

``f`` extended to fractional ``z`` is convex, so its minimum over
``{0 <= z <= 1, e'z <= k}`` bounds every binary pattern from below.  The
minimum is approached with a stabilised cutting-plane (in-out) loop on the
oracle; plain Kelley is the same loop with the stabilisation switched off.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .instance import Instance, RegressionForm
from .lp import CutLP
from .oracle import (
    Cut,
    DualCertificate,
    evaluate,
    make_optimality_cut,
)

INOUT_EPS = 1e-10
STALL_TOL = 1e-9


def theta_floor(inst: Instance) -> float:
    """A priori lower bound on ``f``: on the simplex the objective is at least ``-kappa max(mu)``."""
    return -inst.kappa * float(np.max(inst.mu)) - 1e-9 * (1.0 + inst.kappa * float(np.max(np.abs(inst.mu))))


def top_k_indices(scores: np.ndarray, k: int) -> np.ndarray:
    """Indices of the ``k`` largest scores, ties broken towards the smaller index."""
    order = np.lexsort((np.arange(scores.size), -scores))
    return np.sort(order[:k])


def top_k_sum(values: np.ndarray, k: int) -> float:
    return float(np.sum(np.sort(values)[::-1][:k]))


@dataclass
class RelaxationResult:
    theta_socp: float
    z_frac: np.ndarray
    cuts: list[Cut]
    recovered: bool
    z_rounded: np.ndarray | None
    iterations: int
    upper_estimate: float = math.inf
    certificate: DualCertificate | None = None
    status: str = "converged"
    trace: list[tuple[int, float, float]] = field(default_factory=list)
    rounded_value: float = math.inf

    @property
    def gap(self) -> float:
        return self.upper_estimate - self.theta_socp


def relaxation_lp(inst: Instance) -> CutLP:
    """Cut model over ``{0 <= z <= 1, 1 <= e'z <= k}``."""
    n = inst.n
    lp = CutLP(n, theta_floor(inst))
    lp.add_z_row(-np.ones(n), -float(inst.k), kind="budget")
    lp.add_z_row(np.ones(n), 1.0, kind="nonempty")
    return lp


def add_cut_to_lp(lp: CutLP, cut: Cut) -> None:
    if cut.kind == "optimality":
        # theta - g'z >= f - g'z0
        lp.add_z_row(-cut.grad, cut.offset - cut.grad @ cut.origin, theta_coef=1.0, kind="optimality")
    else:
        lp.add_z_row(cut.coef, cut.rhs, kind="feasibility")


def run_inout(lp: CutLP, rf: RegressionForm, inst: Instance, stabilizer: np.ndarray,
              max_iter: int = 200, max_cuts: int = 200, eps: float = INOUT_EPS,
              kelley: bool = False, on_cut=None, deadline: float | None = None):
    """Stabilised cutting-plane loop on ``lp`` (modified in place).

    Returns ``(theta, best_value, best_z, best_cert, cuts, iterations, status, trace)``.
    ``theta`` is the last master value, a valid lower bound on ``f`` over
    the LP's feasible set.
    """
    import time

    lam, delta = (1.0, 0.0) if kelley else (0.1, 2.0 * eps)
    stab = np.clip(np.asarray(stabilizer, dtype=float), 0.0, 1.0)
    stalls = 0
    prev_theta = -math.inf
    best_f, best_z, best_cert = math.inf, None, None
    cuts: list[Cut] = []
    trace = []
    theta = -math.inf
    status = "iteration_limit"
    t = 0
    while True:
        t += 1
        lp_status, v = lp.solve()
        if lp_status != "optimal":
            status = "master_" + lp_status
            break
        z0 = np.clip(v[: inst.n], 0.0, 1.0)
        theta = max(theta, float(v[inst.n]))
        if theta > prev_theta + STALL_TOL:
            stalls = 0
        else:
            stalls += 1
        prev_theta = max(prev_theta, theta)
        if stalls >= 5:
            lam = 1.0
        if stalls >= 10:
            delta = 0.0
        trace.append((t, theta, best_f))
        if best_f - theta <= eps:
            status = "converged"
            break
        if t > max_iter or len(cuts) >= max_cuts:
            break
        if deadline is not None and time.perf_counter() > deadline:
            status = "time_limit"
            break
        z = np.clip(lam * z0 + (1.0 - lam) * stab + delta, 0.0, 1.0)
        cert = evaluate(rf, inst, z)
        if not cert.optimal:
            z = np.clip(0.5 * (z + stab), 0.0, 1.0)
            cert = evaluate(rf, inst, z)
            if not cert.optimal:
                status = "oracle_infeasible"
                break
        cut = make_optimality_cut(cert, rf, inst)
        add_cut_to_lp(lp, cut)
        cuts.append(cut)
        if on_cut is not None:
            on_cut(cut)
        in_hull = z.sum() <= inst.k + 1e-9 and np.all(lp.z_lo - 1e-12 <= z) and np.all(z <= lp.z_hi + 1e-12)
        if in_hull and cert.value < best_f:
            best_f, best_z, best_cert = cert.value, z, cert
    return theta, best_f, best_z, best_cert, cuts, t, status, trace


def default_stabilizer(inst: Instance) -> np.ndarray:
    return np.full(inst.n, inst.k / inst.n)


def inout_bound(rf: RegressionForm, inst: Instance, stabilizer=None, max_iter: int = 200,
                max_cuts: int = 200, eps: float = INOUT_EPS, kelley: bool = False,
                recover: bool = True, deadline: float | None = None) -> RelaxationResult:
    """Bound the relaxation optimum with the in-out loop (or plain Kelley)."""
    lp = relaxation_lp(inst)
    stab = default_stabilizer(inst) if stabilizer is None else np.asarray(stabilizer, float)
    theta, best_f, best_z, best_cert, cuts, iters, status, trace = run_inout(
        lp, rf, inst, stab, max_iter=max_iter, max_cuts=max_cuts, eps=eps, kelley=kelley,
        deadline=deadline,
    )
    res = RelaxationResult(
        theta_socp=theta,
        z_frac=best_z if best_z is not None else stab,
        cuts=cuts,
        recovered=False,
        z_rounded=None,
        iterations=iters,
        upper_estimate=best_f,
        certificate=best_cert,
        status=status,
        trace=trace,
    )
    if recover and best_cert is not None:
        ok, z_round, bound, fr = recovery_certificate(best_cert, rf, inst)
        res.z_rounded = z_round
        res.rounded_value = fr
        res.theta_socp = max(res.theta_socp, bound)
        res.recovered = ok and fr - res.theta_socp <= 1e-6
    return res


def dual_bound_topk(cert: DualCertificate, rf: RegressionForm, inst: Instance) -> float:
    """Relaxation lower bound from the multipliers ``(alpha, beta, lambda)`` alone.

    The multipliers with ``w`` completed minimally and the top-``k`` penalty
    form a feasible point of the dual of the relaxation, so its objective
    bounds every pattern from below.
    """
    v = rf.X.T @ cert.alpha + inst.A.T @ (cert.beta_l - cert.beta_u) + cert.lam - rf.d
    w = np.maximum(v, 0.0)
    on_l = cert.beta_l > 0
    on_u = cert.beta_u > 0
    val = (
        -0.5 * cert.alpha @ cert.alpha
        + rf.y @ cert.alpha
        + cert.lam
        + (cert.beta_l[on_l] @ inst.lower[on_l] if np.any(on_l) else 0.0)
        - (cert.beta_u[on_u] @ inst.upper[on_u] if np.any(on_u) else 0.0)
        - top_k_sum(0.5 * rf.gamma_i * w * w, inst.k)
        - rf.c0
    )
    return float(val)


def round_top_k(cert: DualCertificate, rf: RegressionForm, k: int) -> tuple[np.ndarray, bool]:
    """Top-``k`` rounding on ``gamma_i w_i^2``; the flag reports a strict gap at position ``k``."""
    score = rf.gamma_i * cert.w * cert.w
    idx = top_k_indices(score, k)
    z = np.zeros(score.size)
    z[idx] = 1.0
    if k >= score.size:
        return z, True
    ordered = np.sort(score)[::-1]
    return z, bool(ordered[k - 1] - ordered[k] > 1e-9)


def check_support_recovery(cert: DualCertificate, inst: Instance, rf: RegressionForm,
                           tol: float = 1e-7) -> tuple[bool, np.ndarray]:
    """Sufficient test that the rounded pattern is optimal.

    ``x_i = gamma_i z_i w_i`` on the rounded support must be a feasible
    portfolio and the score gap at position ``k`` strict.
    """
    z, strict = round_top_k(cert, rf, inst.k)
    if not strict:
        return False, z
    x = rf.gamma_i * z * cert.w
    if abs(x.sum() - 1.0) > tol or np.any(z * cert.w < -tol):
        return False, z
    ax = inst.A @ x
    if np.any(ax < inst.lower - tol) or np.any(ax > inst.upper + tol):
        return False, z
    if inst.x_min is not None:
        on = z > 0.5
        if np.any(x[on] < inst.x_min[on] - tol):
            return False, z
    return True, z


def recovery_certificate(cert: DualCertificate, rf: RegressionForm, inst: Instance):
    """``(conditions_hold, z_rounded, dual_bound, f(z_rounded))``."""
    ok, z = check_support_recovery(cert, inst, rf)
    bound = dual_bound_topk(cert, rf, inst)
    rc = evaluate(rf, inst, z)
    return ok, z, bound, rc.value


def perspective_objective(rf: RegressionForm, z: np.ndarray, x: np.ndarray) -> float:
    """Relaxed objective with the ridge term in perspective form ``x_i^2 / z_i``."""
    z = np.asarray(z, dtype=float)
    x = np.asarray(x, dtype=float)
    on = z > 1e-12
    if np.any(np.abs(x[~on]) > 0):
        return math.inf
    r = rf.y - rf.X @ x
    return float(0.5 * r @ r + 0.5 * np.sum(x[on] ** 2 / (rf.gamma_i[on] * z[on])) + rf.d @ x - rf.c0)


def closed_form_diagonal(gammas, k: int) -> tuple[np.ndarray, float]:
    """Optimal portfolio of ``min sum x_i^2/(2 gamma_i)`` over ``k``-sparse points of the simplex.

    Parameters
    ----------
    gammas : array_like
        Per-asset regularisers (larger means cheaper).
    k : int
        Sparsity budget.

    Returns
    -------
    x : ndarray
        Weights proportional to the ``k`` largest ``gammas``.
    value : float
        ``1 / (2 * sum of the selected gammas)``.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    g = np.asarray(gammas, dtype=float)
    idx = top_k_indices(g, min(k, g.size))
    total = float(g[idx].sum())
    x = np.zeros(g.size)
    x[idx] = g[idx] / total
    return x, 0.5 / total


def is_closed_form_instance(inst: Instance, tol: float = 0.0) -> bool:
    """Diagonal covariance, constant returns, no rows and no minimum investments."""
    S = inst.Sigma
    off = S - np.diag(np.diag(S))
    return (
        inst.m == 0
        and inst.x_min is None
        and np.max(np.abs(off), initial=0.0) <= tol
        and np.ptp(inst.mu) <= tol
    )


def closed_form_solve(inst: Instance) -> tuple[np.ndarray, float]:
    """Closed-form optimum of a diagonal instance, in objective units."""
    if not is_closed_form_instance(inst):
        raise ValueError("closed form needs diagonal covariance, constant returns and no rows")
    gammas = 1.0 / (inst.sigma * np.diag(inst.Sigma) + 1.0 / inst.gamma)
    x, value = closed_form_diagonal(gammas, inst.k)
    return x, value - inst.kappa * float(inst.mu[0])
