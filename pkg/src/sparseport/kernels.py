"""Dense numeric kernels: dual active-set QP, dual active-set LP, pivoted Cholesky.

Every kernel is written in the NumPy subset numba understands, so the same
source runs compiled or interpreted (see :mod:`sparseport._jit`).

Constraint convention shared by the QP and LP kernels: all constraints are
rows ``C[i] @ x >= b[i]``.  Rows that are simple variable bounds carry
``bvar[i] = j`` (the variable index) and ``bsign[i] = +1`` (lower bound,
``x_j >= b``) or ``-1`` (upper bound, ``-x_j >= b``).  General rows have
``bvar[i] = -1``.  Bound rows are eliminated from the linear algebra, so the
per-iteration cost scales with the number of free variables only.
"""
import numpy as np

from ._jit import njit

QP_OPTIMAL = 0
QP_INFEASIBLE = 1
QP_ITERATION_LIMIT = 2

LP_OPTIMAL = 0
LP_INFEASIBLE = 1
LP_ITERATION_LIMIT = 2


@njit
def _gi_direction(G, C, npv, active, nact, bvar, bsign, flip, fixed):
    # Solves [G N; N^T 0][z; r] = [npv; 0] with N the active normals.
    n = G.shape[0]
    nf = 0
    free = np.empty(n, np.int64)
    for j in range(n):
        if fixed[j] < 0:
            free[nf] = j
            nf += 1
    gen = np.empty(nact, np.int64)
    ng = 0
    for a in range(nact):
        if bvar[active[a]] < 0:
            gen[ng] = a
            ng += 1
    z = np.zeros(n)
    r = np.zeros(nact)
    rgen = np.zeros(ng)
    if nf > 0:
        GF = np.empty((nf, nf))
        rhs = np.empty((nf, ng + 1))
        for p in range(nf):
            for q in range(nf):
                GF[p, q] = G[free[p], free[q]]
            rhs[p, 0] = npv[free[p]]
            for g in range(ng):
                i = active[gen[g]]
                rhs[p, g + 1] = flip[i] * C[i, free[p]]
        sol = np.linalg.solve(GF, rhs)
        zF = sol[:, 0].copy()
        if ng > 0:
            NRF = np.ascontiguousarray(rhs[:, 1:])
            HN = np.ascontiguousarray(sol[:, 1:])
            S = NRF.T @ HN
            rgen = np.linalg.solve(S, NRF.T @ zF)
            zF = zF - HN @ rgen
        for p in range(nf):
            z[free[p]] = zF[p]
    for g in range(ng):
        r[gen[g]] = rgen[g]
    Gz = G @ z
    for a in range(nact):
        i = active[a]
        j = bvar[i]
        if j >= 0:
            val = npv[j] - Gz[j]
            for g in range(ng):
                ig = active[gen[g]]
                val -= rgen[g] * flip[ig] * C[ig, j]
            r[a] = val / bsign[i]
    return z, r, Gz


@njit
def _gi_refine(G, c, C, b, active, nact, bvar, bsign, flip, fixed):
    # Re-solves the equality-constrained QP on the final working set.
    n = G.shape[0]
    x = np.zeros(n)
    for a in range(nact):
        i = active[a]
        j = bvar[i]
        if j >= 0:
            x[j] = b[i] / bsign[i]
    nf = 0
    free = np.empty(n, np.int64)
    for j in range(n):
        if fixed[j] < 0:
            free[nf] = j
            nf += 1
    gen = np.empty(nact, np.int64)
    ng = 0
    for a in range(nact):
        if bvar[active[a]] < 0:
            gen[ng] = a
            ng += 1
    ugen = np.zeros(ng)
    if nf > 0:
        Gx = G @ x
        GF = np.empty((nf, nf))
        rhs = np.empty((nf, ng + 1))
        for p in range(nf):
            for q in range(nf):
                GF[p, q] = G[free[p], free[q]]
            rhs[p, 0] = -c[free[p]] - Gx[free[p]]
            for g in range(ng):
                i = active[gen[g]]
                rhs[p, g + 1] = flip[i] * C[i, free[p]]
        sol = np.linalg.solve(GF, rhs)
        xF = sol[:, 0].copy()
        if ng > 0:
            NRF = np.ascontiguousarray(rhs[:, 1:])
            HN = np.ascontiguousarray(sol[:, 1:])
            target = np.empty(ng)
            for g in range(ng):
                i = active[gen[g]]
                acc = flip[i] * b[i]
                for j in range(n):
                    if fixed[j] >= 0:
                        acc -= flip[i] * C[i, j] * x[j]
                target[g] = acc
            S = NRF.T @ HN
            ugen = np.linalg.solve(S, target - NRF.T @ xF)
            xF = xF + HN @ ugen
        for p in range(nf):
            x[free[p]] = xF[p]
    grad = G @ x + c
    u = np.zeros(nact)
    for g in range(ng):
        u[gen[g]] = ugen[g]
    for a in range(nact):
        i = active[a]
        j = bvar[i]
        if j >= 0:
            val = grad[j]
            for g in range(ng):
                ig = active[gen[g]]
                val -= ugen[g] * flip[ig] * C[ig, j]
            u[a] = val / bsign[i]
    return x, u


@njit
def gi_solve(G, c, C, b, meq, bvar, bsign, tol, maxit):
    """Goldfarb-Idnani dual active-set method for a strictly convex QP.

    Minimises ``0.5 x'Gx + c'x`` subject to ``C[:meq] x = b[:meq]`` and
    ``C[meq:] x >= b[meq:]``.  ``G`` must be positive definite.

    Returns ``(status, x, u, isact, iterations, cert)``.  ``u`` holds one
    multiplier per row with ``G x + c = C' u``; entries for inequality rows
    are nonnegative.  On infeasibility ``cert`` is a vector ``y`` with
    ``C' y = 0``, ``b' y > 0`` and ``y >= 0`` on inequality rows.
    """
    n = G.shape[0]
    m = C.shape[0]
    x = np.linalg.solve(G, -c)
    u = np.zeros(m)
    flip = np.ones(m)
    isact = np.zeros(m, np.bool_)
    done = np.zeros(m, np.bool_)
    active = np.empty(n + 1, np.int64)
    nact = 0
    fixed = -np.ones(n, np.int64)
    cert = np.zeros(m)
    rownorm = np.empty(m)
    for i in range(m):
        rownorm[i] = max(np.max(np.abs(C[i])), 1e-300)
    status = QP_OPTIMAL
    it = 0
    while True:
        p = -1
        for i in range(meq):
            if not isact[i] and not done[i]:
                p = i
                break
        if p >= 0:
            s = C[p] @ x - b[p]
            flip[p] = -1.0 if s > 0.0 else 1.0
        else:
            worst = 0.0
            for i in range(meq, m):
                if isact[i]:
                    continue
                s = C[i] @ x - b[i]
                if s < -tol * (1.0 + abs(b[i])):
                    score = s / rownorm[i]
                    if score < worst:
                        worst = score
                        p = i
            if p < 0:
                break
        npv = flip[p] * C[p]
        bp = flip[p] * b[p]
        nscale = np.max(np.abs(npv))
        up = 0.0
        added = False
        while True:
            it += 1
            if it > maxit:
                status = QP_ITERATION_LIMIT
                break
            z, r, Gz = _gi_direction(G, C, npv, active, nact, bvar, bsign, flip, fixed)
            rmax = 0.0
            for a in range(nact):
                rmax = max(rmax, abs(r[a]))
            t1 = np.inf
            l = -1
            for a in range(nact):
                i = active[a]
                if i < meq:
                    continue
                if r[a] > 1e-12 * (1.0 + rmax):
                    ratio = u[i] / r[a]
                    if ratio < t1:
                        t1 = ratio
                        l = a
            sp = npv @ x - bp
            # a full working set spans every normal, whatever rounding says
            dependent = nact >= n or np.max(np.abs(Gz)) <= 1e-11 * nscale
            ztn = z @ npv
            t2 = np.inf
            if not dependent and ztn > 0.0:
                t2 = max(-sp, 0.0) / ztn
            if t2 == np.inf and t1 == np.inf:
                if p < meq and abs(sp) <= tol * (1.0 + abs(bp)):
                    done[p] = True
                    break
                status = QP_INFEASIBLE
                cert[p] = flip[p]
                for a in range(nact):
                    i = active[a]
                    cert[i] = -r[a] * flip[i]
                break
            if t2 == np.inf:
                for a in range(nact):
                    u[active[a]] -= t1 * r[a]
                up += t1
                i = active[l]
                u[i] = 0.0
                isact[i] = False
                if bvar[i] >= 0:
                    fixed[bvar[i]] = -1
                for a in range(l, nact - 1):
                    active[a] = active[a + 1]
                nact -= 1
                continue
            t = min(t1, t2)
            x = x + t * z
            for a in range(nact):
                u[active[a]] -= t * r[a]
            up += t
            if t2 <= t1:
                u[p] = up
                isact[p] = True
                active[nact] = p
                nact += 1
                if bvar[p] >= 0:
                    fixed[bvar[p]] = p
                added = True
                break
            i = active[l]
            u[i] = 0.0
            isact[i] = False
            if bvar[i] >= 0:
                fixed[bvar[i]] = -1
            for a in range(l, nact - 1):
                active[a] = active[a + 1]
            nact -= 1
        if status != QP_OPTIMAL:
            break
        if not added and not done[p]:
            break
    if status == QP_OPTIMAL and nact > 0:
        xr, ur = _gi_refine(G, c, C, b, active, nact, bvar, bsign, flip, fixed)
        ok = True
        for a in range(nact):
            if active[a] >= meq and ur[a] < -1e-9 * (1.0 + abs(ur[a])):
                ok = False
        if ok:
            for i in range(meq, m):
                if C[i] @ xr - b[i] < -tol * (1.0 + abs(b[i])):
                    ok = False
                    break
        if ok:
            x = xr
            for a in range(nact):
                u[active[a]] = ur[a]
    for i in range(meq):
        u[i] *= flip[i]
    return status, x, u, isact, it, cert


@njit
def _lp_basis_solve(C, b, W, bvar, bsign, n):
    # Vertex defined by the n rows in W: returns x with C[W] x = b[W].
    fixed = -np.ones(n, np.int64)
    x = np.zeros(n)
    for a in range(n):
        i = W[a]
        if bvar[i] >= 0:
            fixed[bvar[i]] = a
            x[bvar[i]] = b[i] / bsign[i]
    nf = 0
    free = np.empty(n, np.int64)
    for j in range(n):
        if fixed[j] < 0:
            free[nf] = j
            nf += 1
    gen = np.empty(n, np.int64)
    ng = 0
    for a in range(n):
        if bvar[W[a]] < 0:
            gen[ng] = a
            ng += 1
    M = np.empty((ng, nf))
    if ng > 0:
        rhs = np.empty(ng)
        for g in range(ng):
            i = W[gen[g]]
            acc = b[i]
            for j in range(n):
                if fixed[j] >= 0:
                    acc -= C[i, j] * x[j]
            rhs[g] = acc
            for p in range(nf):
                M[g, p] = C[i, free[p]]
        xf = np.linalg.solve(M, rhs)
        for p in range(nf):
            x[free[p]] = xf[p]
    return x, M, free, nf, gen, ng, fixed


@njit
def _lp_basis_tsolve(C, W, bvar, bsign, n, M, free, nf, gen, ng, a):
    # Solves C[W]^T r = a.
    r = np.zeros(n)
    rg = np.zeros(ng)
    if ng > 0:
        af = np.empty(nf)
        for p in range(nf):
            af[p] = a[free[p]]
        rg = np.linalg.solve(M.T.copy(), af)
        for g in range(ng):
            r[gen[g]] = rg[g]
    for k in range(n):
        i = W[k]
        j = bvar[i]
        if j >= 0:
            val = a[j]
            for g in range(ng):
                val -= rg[g] * C[W[gen[g]], j]
            r[k] = val / bsign[i]
    return r


@njit
def dual_lp(C, b, cost, bvar, bsign, W0, tol, maxit):
    """Dual simplex on the vertex (active-row) representation.

    Minimises ``cost @ x`` subject to ``C x >= b``.  ``W0`` lists ``n`` rows
    whose normals are linearly independent and whose multipliers for
    ``cost`` are nonnegative (a dual feasible vertex).  Adding rows or
    changing ``b`` keeps a previous final ``W`` dual feasible, so it can be
    passed back in as a warm start.

    Returns ``(status, x, W, lam, iterations)``; ``lam`` holds the
    multipliers of the rows in ``W``.
    """
    m = C.shape[0]
    n = C.shape[1]
    W = W0.copy()
    inW = np.zeros(m, np.bool_)
    for a in range(n):
        inW[W[a]] = True
    rownorm = np.empty(m)
    for i in range(m):
        rownorm[i] = max(np.sqrt(C[i] @ C[i]), 1e-300)
    status = LP_ITERATION_LIMIT
    degenerate = 0
    it = 0
    x = np.zeros(n)
    lam = np.zeros(n)
    while it < maxit:
        it += 1
        x, M, free, nf, gen, ng, fixed = _lp_basis_solve(C, b, W, bvar, bsign, n)
        lam = _lp_basis_tsolve(C, W, bvar, bsign, n, M, free, nf, gen, ng, cost)
        for a in range(n):
            if lam[a] < 0.0:
                lam[a] = 0.0
        bland = degenerate > 50
        q = -1
        worst = 0.0
        for i in range(m):
            if inW[i]:
                continue
            s = (C[i] @ x - b[i]) / rownorm[i]
            if s < -tol * (1.0 + abs(b[i]) / rownorm[i]):
                if bland:
                    q = i
                    break
                if s < worst:
                    worst = s
                    q = i
        if q < 0:
            status = LP_OPTIMAL
            break
        r = _lp_basis_tsolve(C, W, bvar, bsign, n, M, free, nf, gen, ng, C[q].copy())
        rmax = 0.0
        for a in range(n):
            rmax = max(rmax, abs(r[a]))
        t = np.inf
        leave = -1
        for a in range(n):
            if r[a] > 1e-11 * (1.0 + rmax):
                ratio = lam[a] / r[a]
                if ratio < t - 1e-14:
                    t = ratio
                    leave = a
                elif ratio <= t + 1e-14 and W[a] < W[leave]:
                    leave = a
        if leave < 0:
            status = LP_INFEASIBLE
            break
        if t <= 1e-14:
            degenerate += 1
        else:
            degenerate = 0
        inW[W[leave]] = False
        W[leave] = q
        inW[q] = True
    return status, x, W, lam, it


@njit
def pivoted_cholesky(S, tol):
    """Rank-revealing Cholesky ``S[P][:, P] ~= R'R`` with diagonal pivoting.

    Stops once the largest remaining diagonal drops to ``tol`` or below.
    Returns ``(F, rank)`` where ``F`` (``rank x n``) satisfies ``F'F ~= S``
    in the original ordering.
    """
    n = S.shape[0]
    A = S.copy()
    F = np.zeros((n, n))
    perm = np.arange(n)
    rank = 0
    for k in range(n):
        piv = k
        best = -np.inf
        for j in range(k, n):
            if A[perm[j], perm[j]] > best:
                best = A[perm[j], perm[j]]
                piv = j
        if best <= tol:
            break
        tmp = perm[k]
        perm[k] = perm[piv]
        perm[piv] = tmp
        pk = perm[k]
        root = np.sqrt(A[pk, pk])
        F[k, pk] = root
        for j in range(k + 1, n):
            pj = perm[j]
            F[k, pj] = A[pk, pj] / root
        for i in range(k + 1, n):
            pi = perm[i]
            for j in range(k + 1, n):
                pj = perm[j]
                A[pi, pj] -= F[k, pi] * F[k, pj]
        rank += 1
    return F[:rank].copy(), rank
