"""Exhaustive support enumeration, built straight from the instance data.

This path never touches the regression rewrite or the cut machinery, which
makes it an independent reference for the branch-and-cut solver.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .instance import Instance
from .qp import QpProblem, QpResult, solve_qp

DEFAULT_SUPPORT_CAP = 2_000_000
# ridge used when the 1/(2 gamma) term is dropped, so the kernel sees a PD matrix
UNREGULARIZED_RIDGE = 1e-11


class EnumerationCapExceeded(RuntimeError):
    def __init__(self, count: int, cap: int):
        self.count = count
        self.cap = cap
        super().__init__(f"{count} supports exceed the enumeration cap of {cap}")


@dataclass
class EnumerationResult:
    value: float
    support: tuple[int, ...] | None
    x: np.ndarray | None
    supports_checked: int

    @property
    def feasible(self) -> bool:
        return self.support is not None


def restricted_qp(inst: Instance, support, regularized: bool = True) -> QpResult:
    """Portfolio QP with every asset outside ``support`` fixed at zero.

    Minimum investments, when present, apply to every asset of the support.
    """
    S = np.asarray(support, dtype=np.int64)
    Q = inst.sigma * inst.Sigma[np.ix_(S, S)]
    if regularized:
        Q = Q + np.eye(S.size) / inst.gamma
    else:
        Q = Q + UNREGULARIZED_RIDGE * max(1.0, float(np.trace(Q)) / S.size) * np.eye(S.size)
    lb = inst.x_min[S] if inst.x_min is not None else np.zeros(S.size)
    prob = QpProblem(
        Q=Q,
        c=-inst.kappa * inst.mu[S],
        A=np.vstack([inst.A[:, S], np.ones((1, S.size))]),
        lo=np.append(inst.lower, 1.0),
        hi=np.append(inst.upper, 1.0),
        lb=lb,
    )
    return solve_qp(prob, tol=1e-11)


def support_sizes(inst: Instance) -> range:
    # without minimum investments a larger support can only help
    if inst.x_min is None:
        return range(inst.k, inst.k + 1)
    return range(1, inst.k + 1)


def count_supports(inst: Instance) -> int:
    return sum(math.comb(inst.n, s) for s in support_sizes(inst))


def enumerate_optimum(inst: Instance, regularized: bool = True,
                      cap: int = DEFAULT_SUPPORT_CAP) -> EnumerationResult:
    """Best objective over all admissible supports.

    Raises :class:`EnumerationCapExceeded` when there are more than ``cap``
    supports to check.
    """
    total = count_supports(inst)
    if total > cap:
        raise EnumerationCapExceeded(total, cap)
    best = EnumerationResult(np.inf, None, None, 0)
    checked = 0
    for size in support_sizes(inst):
        for S in itertools.combinations(range(inst.n), size):
            checked += 1
            res = restricted_qp(inst, S, regularized)
            if res.status == "iteration_limit":
                raise RuntimeError(f"QP on support {S} hit its iteration cap")
            if not res.optimal:
                continue
            x = np.zeros(inst.n)
            x[list(S)] = res.x
            val = inst.objective(x, regularized)
            if val < best.value - 1e-13:
                best = EnumerationResult(val, S, x, 0)
    best.supports_checked = checked
    return best
