"""Multi-start warm-start heuristic.

Each start ranks assets by the distance between their current weight and a
gradient step on ``f`` and keeps the ``k`` best, averaging the dual ``w``
across iterations.  The best pattern that survives a final feasibility probe
is returned.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .instance import Instance, RegressionForm
from .oracle import DualCertificate, SparsityPattern, evaluate
from .relaxation import top_k_indices


@dataclass
class HeuristicConfig:
    starts: int = 5
    T: int = 50
    # None means: estimate from the certificates of the starting patterns
    L: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.starts < 1 or self.T < 1:
            raise ValueError("starts and T must be at least 1")
        if self.L is not None and not self.L > 0:
            raise ValueError("L must be positive")


def _pattern(n: int, idx) -> np.ndarray:
    z = np.zeros(n)
    z[np.asarray(idx, dtype=np.int64)] = 1.0
    return z


def next_pattern(cert_w: np.ndarray, z: np.ndarray, gamma_i: np.ndarray, L: float, k: int) -> np.ndarray:
    """Rank ``|-x_i + g_i / L|`` with ``x_i = gamma_i w_i`` on the support and keep the top ``k``."""
    x = np.where(z > 0.5, gamma_i * cert_w, 0.0)
    g = -0.5 * gamma_i * cert_w * cert_w
    score = np.abs(-x + g / L)
    return _pattern(z.size, top_k_indices(score, k))


def lipschitz_estimate(certs: list[DualCertificate], gamma_i: np.ndarray) -> float:
    vals = [float(np.max(0.5 * gamma_i * c.w * c.w)) for c in certs if c.optimal]
    L = max(vals, default=0.0)
    return L if L > 0 else 1.0


def _run_start(rf, inst, z, first: DualCertificate, L: float, T: int):
    w_bar = None
    cert = first
    t = 1
    while True:
        if not cert.optimal:
            return z, False
        w_bar = cert.w.copy() if w_bar is None else cert.w / t + (t - 1) / t * w_bar
        z_new = next_pattern(w_bar, z, rf.gamma_i, L, inst.k)
        t += 1
        if np.array_equal(z_new, z) or t >= T:
            return z_new, True
        z = z_new
        cert = evaluate(rf, inst, z)


def _distinct_starts(rng, n: int, k: int, count: int) -> list[np.ndarray]:
    # distinct while there are enough patterns; repeats only once all are used
    total = math.comb(n, k)
    seen, out = set(), []
    while len(out) < count:
        idx = tuple(sorted(int(i) for i in rng.choice(n, size=k, replace=False)))
        if idx in seen and len(seen) < total:
            continue
        seen.add(idx)
        out.append(_pattern(n, idx))
    return out


def warm_start(rf: RegressionForm, inst: Instance, cfg: HeuristicConfig | None = None):
    """Best feasible pattern over ``cfg.starts`` random starts.

    Returns ``(SparsityPattern, value)``, or ``None`` if no start ends at a
    feasible pattern.
    """
    cfg = cfg or HeuristicConfig()
    rng = np.random.default_rng(cfg.seed)
    n, k = inst.n, inst.k
    starts = _distinct_starts(rng, n, k, cfg.starts)
    firsts = [evaluate(rf, inst, z) for z in starts]
    L = cfg.L if cfg.L is not None else lipschitz_estimate(firsts, rf.gamma_i)
    best = None
    for z0, c0 in zip(starts, firsts):
        if not c0.optimal:
            continue
        z, _ = _run_start(rf, inst, z0, c0, L, cfg.T)
        probe = evaluate(rf, inst, z)
        if not probe.optimal:
            continue
        key = (probe.value, tuple(np.flatnonzero(z > 0.5)))
        if best is None or key[0] < best[0][0] - 1e-12 or (
            abs(key[0] - best[0][0]) <= 1e-12 and key[1] < best[0][1]
        ):
            best = (key, z)
    if best is None:
        return None
    return SparsityPattern(best[1]), best[0][0]
