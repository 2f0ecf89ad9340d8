"""Single-tree branch-and-cut over sparsity patterns.

Each node solves the cut-model LP ``min theta`` over the node's box.  Integral
LP points are handed to the oracle, which returns either an optimality cut
or, for patterns with no feasible portfolio, a no-good cut.  Fractional
points are branched on.  The tree is explored best bound first.
"""
from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .enumerate import restricted_qp
from .heuristic import HeuristicConfig, warm_start
from .instance import Instance, RegressionForm
from .lp import CutLP
from .oracle import (
    Cut,
    DualCertificate,
    SparsityPattern,
    check_single_cut_optimality,
    evaluate,
    make_feasibility_cut,
    make_optimality_cut,
)
from .relaxation import (
    RelaxationResult,
    add_cut_to_lp,
    dual_bound_topk,
    inout_bound,
    recovery_certificate,
    run_inout,
    theta_floor,
)

INTEGRALITY_TOL = 1e-6


@dataclass
class SolveOptions:
    eps: float = 1e-6
    time_limit: float | None = None
    node_limit: int | None = None
    warm_start: bool = True
    # "auto": on with side constraints or minimum investments
    root_inout: object = "auto"
    node_inout: bool = False
    # "auto" turns the copied x block on with minimum investments or >= 2 rows
    copy_vars: str = "auto"
    root_cut_cap: int = 200
    node_cut_cap: int = 20
    inout_node_cap: int = 50
    inout_max_depth: int = 3
    inout_min_fractionality: float = 0.2
    heuristic: HeuristicConfig = field(default_factory=HeuristicConfig)
    stabilizer: np.ndarray | None = None
    seed: int | None = None
    on_event: object = None

    def use_copy(self, inst: Instance) -> bool:
        if self.copy_vars == "on":
            return True
        if self.copy_vars == "off":
            return False
        if self.copy_vars != "auto":
            raise ValueError(f"copy_vars must be auto, on or off, not {self.copy_vars!r}")
        return inst.x_min is not None or inst.m >= 2

    def use_root_inout(self, inst: Instance) -> bool:
        if self.root_inout == "auto":
            return inst.m >= 1 or inst.x_min is not None
        if isinstance(self.root_inout, str):
            if self.root_inout not in ("on", "off"):
                raise ValueError(f"root_inout must be auto, on or off, not {self.root_inout!r}")
            return self.root_inout == "on"
        return bool(self.root_inout)


@dataclass
class Node:
    fixed_zero: frozenset = frozenset()
    fixed_one: frozenset = frozenset()
    bound: float = -math.inf
    depth: int = 0


@dataclass
class Solution:
    status: str
    z_star: np.ndarray | None
    x_star: np.ndarray | None
    x_polished: np.ndarray | None
    value_regularized: float
    value_polished: float
    lower_bound: float
    gap: float
    nodes: int
    cuts_optimality: int
    cuts_feasibility: int
    cuts_root: int
    wall_time: float
    theta_socp: float = -math.inf
    heuristic_value: float = math.inf
    recovered: bool = False
    single_cut_certified: bool = False
    visited: list = field(default_factory=list)
    trace: list = field(default_factory=list)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def x_upper_bounds(inst: Instance) -> np.ndarray:
    """Per-asset caps implied by rows with nonnegative coefficients and a finite upper side."""
    cap = np.ones(inst.n)
    for j in range(inst.m):
        a, u = inst.A[j], inst.upper[j]
        if np.isfinite(u) and np.all(a >= 0):
            pos = a > 0
            cap[pos] = np.minimum(cap[pos], np.maximum(u, 0.0) / a[pos])
    return cap


def safeguard_rows(inst: Instance) -> list[np.ndarray]:
    """Covering rows: each finite row side needs one selected asset able to meet it.

    On the simplex ``a'x`` is a convex combination of the selected ``a_i``,
    so ``a'x >= l`` needs some ``a_i >= l`` (and likewise for ``u``).
    """
    rows = []
    for j in range(inst.m):
        a = inst.A[j]
        if np.isfinite(inst.lower[j]):
            rows.append((a >= inst.lower[j]).astype(float))
        if np.isfinite(inst.upper[j]):
            rows.append((a <= inst.upper[j]).astype(float))
    return rows


class MasterModel:
    """Cut model of the tree: LP, cut list and the side constraints."""

    def __init__(self, inst: Instance, copy_vars: bool = False):
        self.inst = inst
        n = inst.n
        self.copy_vars = copy_vars
        self.lp = CutLP(n, theta_floor(inst), with_x=copy_vars)
        self.cuts: list[Cut] = []
        self.theta_socp = -math.inf
        self.lp.add_z_row(-np.ones(n), -float(inst.k), kind="budget")
        self.lp.add_z_row(np.ones(n), 1.0, kind="nonempty")
        for row in safeguard_rows(inst):
            self.lp.add_z_row(row, 1.0, kind="safeguard")
        if copy_vars:
            self._add_copy_block()

    def _add_copy_block(self):
        inst, lp, n = self.inst, self.lp, self.inst.n
        xo = n + 1
        cap = x_upper_bounds(inst)
        for i in range(n):
            row = np.zeros(lp.nv)
            row[i] = cap[i]
            row[xo + i] = -1.0
            lp.add_row(row, 0.0, kind="copy")
            if inst.x_min is not None and inst.x_min[i] > 0:
                row = np.zeros(lp.nv)
                row[xo + i] = 1.0
                row[i] = -inst.x_min[i]
                lp.add_row(row, 0.0, kind="copy")
        row = np.zeros(lp.nv)
        row[xo:] = 1.0
        lp.add_row(row, 1.0, kind="copy")
        lp.add_row(-row, -1.0, kind="copy")
        for j in range(inst.m):
            row = np.zeros(lp.nv)
            row[xo:] = inst.A[j]
            if np.isfinite(inst.lower[j]):
                lp.add_row(row, inst.lower[j], kind="copy")
            if np.isfinite(inst.upper[j]):
                lp.add_row(-row, -inst.upper[j], kind="copy")

    def add_cut(self, cut: Cut) -> None:
        self.cuts.append(cut)
        add_cut_to_lp(self.lp, cut)

    def set_theta_socp(self, value: float) -> None:
        self.theta_socp = max(self.theta_socp, value)
        self.lp.set_theta_lb(max(theta_floor(self.inst), self.theta_socp))

    def apply_node(self, node: Node) -> None:
        n = self.inst.n
        lo = np.zeros(n)
        hi = np.ones(n)
        lo[list(node.fixed_one)] = 1.0
        hi[list(node.fixed_zero)] = 0.0
        self.lp.set_bounds(lo, hi)

    def count(self, kind: str) -> int:
        return sum(1 for c in self.cuts if c.kind == kind)


def master_lp_solve(m: MasterModel, node: Node):
    """LP optimum ``(z, theta)`` at ``node``, or ``None`` if the node LP is infeasible."""
    m.apply_node(node)
    status, v = m.lp.solve()
    if status != "optimal":
        if status == "iteration_limit":
            raise RuntimeError("master LP hit its iteration limit")
        return None
    n = m.inst.n
    return np.clip(v[:n], 0.0, 1.0), float(v[n])


def seed_root(m: MasterModel, relax: RelaxationResult | None, warm=None, rf=None):
    """Install relaxation cuts and bound; evaluate an optional warm start.

    Returns the warm start's certificate when it is feasible, else ``None``.
    """
    if relax is not None:
        for cut in relax.cuts:
            m.add_cut(cut)
        m.set_theta_socp(relax.theta_socp)
    if warm is None or rf is None:
        return None
    z = warm.z if isinstance(warm, SparsityPattern) else np.asarray(warm, float)
    cert = evaluate(rf, m.inst, z)
    if not cert.optimal:
        return None
    m.add_cut(make_optimality_cut(cert, rf, m.inst))
    return cert


def polish(inst: Instance, z: np.ndarray, x: np.ndarray):
    """Refit without the ridge term on the support of ``z``; keep ``x`` if the refit is not better."""
    S = np.flatnonzero(z > 0.5)
    base = inst.objective(x, regularized=False)
    res = restricted_qp(inst, S, regularized=False)
    if res.optimal:
        xp = np.zeros(inst.n)
        xp[S] = res.x
        xp = np.maximum(xp, 0.0)
        xp /= xp.sum()
        val = inst.objective(xp, regularized=False)
        if val <= base and inst.is_feasible(xp, tol=1e-7):
            return xp, val
    return x.copy(), base


def _branch_variable(z: np.ndarray) -> int:
    frac = np.minimum(z, 1.0 - z)
    return int(np.argmax(frac))


def solve(rf: RegressionForm, inst: Instance, opts: SolveOptions | None = None) -> Solution:
    """Certifiably optimal pattern up to ``opts.eps`` (or the best found within the caps)."""
    opts = opts or SolveOptions()
    t0 = time.perf_counter()
    deadline = None if opts.time_limit is None else t0 + opts.time_limit
    eps = opts.eps
    n = inst.n
    model = MasterModel(inst, opts.use_copy(inst))
    cache: dict[tuple, DualCertificate] = {}
    visited: list[tuple] = []
    trace = []

    def oracle(z):
        key = tuple(int(v) for v in np.round(z))
        if key not in cache:
            cache[key] = evaluate(rf, inst, np.array(key, dtype=float))
        return cache[key]

    inc_val, inc_z, inc_cert = math.inf, None, None
    lb = -math.inf
    nodes = 0
    certified = False

    def offer(cert, z):
        nonlocal inc_val, inc_z, inc_cert
        if cert.optimal and cert.value < inc_val:
            inc_val, inc_z, inc_cert = cert.value, np.round(z), cert
            return True
        return False

    def record():
        bound = max(lb, model.theta_socp)
        row = (time.perf_counter() - t0, nodes, len(model.cuts), inc_val, min(bound, inc_val))
        trace.append(row)
        if opts.on_event is not None:
            opts.on_event(row)

    heur_val = math.inf
    warm = None
    if opts.warm_start:
        cfg = opts.heuristic
        if opts.seed is not None:
            cfg = HeuristicConfig(starts=cfg.starts, T=cfg.T, L=cfg.L, seed=opts.seed)
        ws = warm_start(rf, inst, cfg)
        if ws is not None:
            warm, heur_val = ws
    wcert = seed_root(model, None, warm, rf)
    recovered = False
    if wcert is not None:
        offer(wcert, warm.z)
        cache[tuple(int(v) for v in np.round(warm.z))] = wcert
        if check_single_cut_optimality(wcert):
            certified = True
            ok, _, bound, fr = recovery_certificate(wcert, rf, inst)
            model.set_theta_socp(min(bound, inc_val))
            recovered = ok and fr - bound <= 1e-6
        else:
            # any dual point bounds the relaxation from below
            model.set_theta_socp(min(dual_bound_topk(wcert, rf, inst), inc_val))
    relax = None
    if opts.use_root_inout(inst) and not certified:
        # the warm-start cut counts against the root budget
        budget = max(opts.root_cut_cap - len(model.cuts), 1)
        relax = inout_bound(rf, inst, stabilizer=opts.stabilizer, max_iter=budget,
                            max_cuts=budget, deadline=deadline)
        seed_root(model, relax)
        if relax.z_rounded is not None:
            rc = oracle(relax.z_rounded)
            offer(rc, relax.z_rounded)
            recovered = bool(rc.optimal and relax.recovered)
    cuts_root = len(model.cuts)
    if not certified and inc_cert is not None and check_single_cut_optimality(inc_cert):
        certified = True
        ok, _, bound, fr = recovery_certificate(inc_cert, rf, inst)
        model.set_theta_socp(min(bound, inc_val))
        recovered = ok and fr - bound <= 1e-6
    lb = model.theta_socp
    record()

    counter = 0
    heap = [(-math.inf, counter, Node())]
    # smallest bound among nodes discarded by the incumbent test
    pruned_min = math.inf
    inout_nodes = 0
    status = "optimal"
    while heap and not certified:
        if inc_val - max(heap[0][0], lb) <= eps:
            break
        if opts.node_limit is not None and nodes >= opts.node_limit:
            status = "node_limit"
            break
        if deadline is not None and time.perf_counter() > deadline:
            status = "time_limit"
            break
        bound, _, node = heapq.heappop(heap)
        lb = max(lb, bound)
        nodes += 1
        node_inout_done = False
        while True:
            sol = master_lp_solve(model, node)
            if sol is None:
                break
            z, theta = sol
            node_bound = max(theta, node.bound)
            if node_bound >= inc_val - eps:
                pruned_min = min(pruned_min, node_bound)
                break
            frac = np.minimum(z, 1.0 - z)
            if np.all(frac <= INTEGRALITY_TOL):
                zb = np.round(z)
                cert = oracle(zb)
                visited.append(tuple(int(v) for v in zb))
                if not cert.optimal:
                    model.add_cut(make_feasibility_cut(zb))
                    continue
                if offer(cert, zb):
                    record()
                    if check_single_cut_optimality(cert):
                        certified = True
                        ok, _, bound, fr = recovery_certificate(cert, rf, inst)
                        model.set_theta_socp(min(bound, inc_val))
                        recovered = ok and fr - bound <= 1e-6
                        break
                if cert.value > theta + eps:
                    model.add_cut(make_optimality_cut(cert, rf, inst))
                    record()
                    continue
                pruned_min = min(pruned_min, node_bound)
                break
            if (
                opts.node_inout
                and not node_inout_done
                and inout_nodes < opts.inout_node_cap
                and node.depth <= opts.inout_max_depth
                and float(frac.max()) >= opts.inout_min_fractionality
            ):
                node_inout_done = True
                inout_nodes += 1
                _, _, _, _, cuts, _, _, _ = run_inout(
                    model.lp, rf, inst, z, max_iter=opts.node_cut_cap,
                    max_cuts=opts.node_cut_cap, deadline=deadline,
                )
                model.cuts.extend(cuts)
                continue
            j = _branch_variable(z)
            for fix_one in (False, True):
                child = Node(
                    fixed_zero=node.fixed_zero | ({j} if not fix_one else set()),
                    fixed_one=node.fixed_one | ({j} if fix_one else set()),
                    bound=node_bound,
                    depth=node.depth + 1,
                )
                if len(child.fixed_one) > inst.k:
                    continue
                counter += 1
                heapq.heappush(heap, (node_bound, counter, child))
            break

    if certified:
        lb = inc_val
    else:
        open_min = heap[0][0] if heap else math.inf
        lb = max(lb, min(open_min, pruned_min, inc_val))
    if inc_z is None:
        status = "infeasible" if status == "optimal" else status
    record()
    wall = time.perf_counter() - t0

    if inc_z is None:
        return Solution(
            status=status, z_star=None, x_star=None, x_polished=None,
            value_regularized=math.inf, value_polished=math.inf, lower_bound=lb,
            gap=math.inf, nodes=nodes, cuts_optimality=model.count("optimality"),
            cuts_feasibility=model.count("feasibility"), cuts_root=cuts_root, wall_time=wall,
            theta_socp=model.theta_socp, heuristic_value=heur_val, recovered=recovered,
            visited=visited, trace=trace,
        )
    lower = min(max(lb, model.theta_socp), inc_val)
    x_star = inc_cert.x.copy()
    x_pol, val_pol = polish(inst, inc_z, x_star)
    return Solution(
        status=status,
        z_star=inc_z,
        x_star=x_star,
        x_polished=x_pol,
        value_regularized=inc_val,
        value_polished=val_pol,
        lower_bound=lower,
        gap=inc_val - lower,
        nodes=nodes,
        cuts_optimality=model.count("optimality"),
        cuts_feasibility=model.count("feasibility"),
        cuts_root=cuts_root,
        wall_time=wall,
        theta_socp=model.theta_socp,
        heuristic_value=heur_val,
        recovered=recovered,
        single_cut_certified=certified,
        visited=visited,
        trace=trace,
    )
