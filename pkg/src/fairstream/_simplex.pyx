# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twin of ``_simplex_py``: identical algorithm and pivot rules.

The pricing / ratio-test / pivot loop runs as typed C loops; setup and
the occasional basis refactorisation stay in numpy.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, isfinite

cnp.import_array()

OPTIMAL = 0
INFEASIBLE = 1
UNBOUNDED = 2
ITERATION_LIMIT = 3

cdef enum:
    AT_LO = 0
    AT_UP = 1
    BASIC = 2

cdef double PIVOT_TOL = 1e-10
cdef double STALL_EPS = 1e-12


cdef int _c_iterate(double[::1] costs, double[:, ::1] tableau,
                    double[::1] x_basic, long[::1] basis, long[::1] vstat,
                    double[::1] lower, double[::1] upper,
                    double tol_opt, long max_iter, long stall_limit,
                    long* iters_out):
    cdef long m = tableau.shape[0]
    cdef long nv = tableau.shape[1]
    cdef long it, i, j, enter, leave, out, bi
    cdef int bland = 0
    cdef int hit = AT_LO, leave_stat = AT_LO
    cdef long stall = 0
    cdef double obj_prev = INFINITY
    cdef double dj, viol, best, direction, step, cand, ci, pivot, factor
    cdef double entering_value, obj
    cdef double[::1] cb = np.empty(m, dtype=np.float64)

    for it in range(max_iter):
        for i in range(m):
            cb[i] = costs[basis[i]]

        # Pricing: Dantzig (largest violation, first index on ties), or
        # Bland (first eligible) after a stall.
        enter = -1
        best = 0.0
        for j in range(nv):
            if vstat[j] == BASIC:
                continue
            dj = costs[j]
            for i in range(m):
                dj -= cb[i] * tableau[i, j]
            if vstat[j] == AT_LO and dj < -tol_opt:
                viol = -dj
            elif vstat[j] == AT_UP and dj > tol_opt:
                viol = dj
            else:
                continue
            if bland:
                enter = j
                break
            if viol > best:
                best = viol
                enter = j
        if enter < 0:
            iters_out[0] = it
            return OPTIMAL
        direction = 1.0 if vstat[enter] == AT_LO else -1.0

        # Ratio test with bound-flip cap.
        step = upper[enter] - lower[enter]
        leave = -1
        leave_stat = AT_LO
        for i in range(m):
            ci = direction * tableau[i, enter]
            bi = basis[i]
            if ci > PIVOT_TOL:
                cand = (x_basic[i] - lower[bi]) / ci
                hit = AT_LO
            elif ci < -PIVOT_TOL:
                if not isfinite(upper[bi]):
                    continue
                cand = (upper[bi] - x_basic[i]) / (-ci)
                hit = AT_UP
            else:
                continue
            if cand < 0.0:
                cand = 0.0
            if cand < step - 1e-12 or (cand < step + 1e-12 and leave >= 0
                                       and basis[i] < basis[leave]):
                step = cand
                leave = i
                leave_stat = hit
        if not isfinite(step):
            iters_out[0] = it
            return UNBOUNDED

        if leave < 0:
            for i in range(m):
                x_basic[i] -= step * direction * tableau[i, enter]
            vstat[enter] = AT_UP if vstat[enter] == AT_LO else AT_LO
        else:
            for i in range(m):
                x_basic[i] -= step * direction * tableau[i, enter]
            entering_value = (lower[enter] if vstat[enter] == AT_LO
                              else upper[enter]) + direction * step
            out = basis[leave]
            vstat[out] = leave_stat
            pivot = tableau[leave, enter]
            for j in range(nv):
                tableau[leave, j] /= pivot
            for i in range(m):
                if i == leave:
                    continue
                factor = tableau[i, enter]
                if factor != 0.0:
                    for j in range(nv):
                        tableau[i, j] -= factor * tableau[leave, j]
            x_basic[leave] = entering_value
            basis[leave] = enter
            vstat[enter] = BASIC

        obj = 0.0
        for j in range(nv):
            if vstat[j] == AT_LO:
                obj += costs[j] * lower[j]
            elif vstat[j] == AT_UP:
                obj += costs[j] * upper[j]
        for i in range(m):
            obj += costs[basis[i]] * x_basic[i]
        if obj_prev - obj < STALL_EPS:
            stall += 1
            if stall >= stall_limit:
                bland = 1
        else:
            stall = 0
            bland = 0
        obj_prev = obj

    iters_out[0] = max_iter
    return ITERATION_LIMIT


def _assemble(x_basic, basis, vstat, lower, upper):
    x = np.where(np.asarray(vstat) == AT_UP, upper, lower).astype(np.float64)
    x[np.asarray(basis)] = x_basic
    return x


def _refactorize(a_full, b, basis, vstat, lower, upper):
    bcols = a_full[:, basis]
    tableau = np.linalg.solve(bcols, a_full)
    x_nb = np.where(np.asarray(vstat) == AT_UP, upper, lower).astype(np.float64)
    x_nb[np.asarray(basis)] = 0.0
    x_basic = np.linalg.solve(bcols, b - a_full @ x_nb)
    return np.ascontiguousarray(tableau), np.ascontiguousarray(x_basic)


def solve(c, a_eq, b_eq, lower, upper, double tol_feas=1e-8,
          double tol_opt=1e-9, long max_iter=0, long stall_limit=256):
    """Bounded-variable two-phase simplex. Returns (status, x, n_iter)."""
    c = np.ascontiguousarray(c, dtype=np.float64)
    b_eq = np.ascontiguousarray(b_eq, dtype=np.float64)
    a_eq = np.ascontiguousarray(a_eq, dtype=np.float64).reshape(len(b_eq), len(c))
    lower = np.ascontiguousarray(lower, dtype=np.float64)
    upper = np.ascontiguousarray(upper, dtype=np.float64)
    if not np.all(np.isfinite(lower)):
        raise ValueError("all lower bounds must be finite")
    if np.any(upper < lower):
        raise ValueError("upper bound below lower bound")
    cdef long n = len(c)
    cdef long m = len(b_eq)
    if max_iter <= 0:
        max_iter = 100 * (n + m) + 1000
    cdef long iters = 0
    cdef long total = 0
    cdef int status

    if m == 0:
        vstat = np.zeros(n, dtype=np.int64)
        basis = np.zeros(0, dtype=np.int64)
        tableau = np.zeros((0, n), dtype=np.float64)
        x_basic = np.zeros(0, dtype=np.float64)
        status = _c_iterate(c, tableau, x_basic, basis, vstat, lower, upper,
                            tol_opt, max_iter, stall_limit, &iters)
        if status != OPTIMAL:
            return status, None, iters
        x = np.clip(_assemble(x_basic, basis, vstat, lower, upper), lower, upper)
        return OPTIMAL, x, iters

    x0 = lower.copy()
    resid = b_eq - a_eq @ x0
    signs = np.where(resid >= 0.0, 1.0, -1.0)
    a_full = np.ascontiguousarray(np.concatenate([a_eq, np.diag(signs)], axis=1))
    cdef long nv = n + m
    lower_f = np.concatenate([lower, np.zeros(m)])
    upper_f = np.concatenate([upper, np.full(m, np.inf)])
    vstat = np.zeros(nv, dtype=np.int64)
    basis = np.arange(n, nv, dtype=np.int64)
    vstat[n:] = BASIC
    tableau = np.ascontiguousarray(signs[:, None] * a_full)
    x_basic = np.ascontiguousarray(np.abs(resid))

    phase1 = np.ascontiguousarray(np.concatenate([np.zeros(n), np.ones(m)]))
    status = _c_iterate(phase1, tableau, x_basic, basis, vstat,
                        lower_f, upper_f, tol_opt, max_iter, stall_limit, &iters)
    total += iters
    if status == ITERATION_LIMIT:
        return status, None, total
    x_full = _assemble(x_basic, basis, vstat, lower_f, upper_f)
    if phase1 @ x_full > tol_feas * (1.0 + np.abs(b_eq).max()):
        return INFEASIBLE, None, total

    upper_f[n:] = 0.0
    try:
        tableau, x_basic = _refactorize(a_full, b_eq, basis, vstat, lower_f, upper_f)
    except np.linalg.LinAlgError:
        pass

    phase2 = np.ascontiguousarray(np.concatenate([c, np.zeros(m)]))
    status = _c_iterate(phase2, tableau, x_basic, basis, vstat,
                        lower_f, upper_f, tol_opt, max_iter, stall_limit, &iters)
    total += iters
    if status != OPTIMAL:
        return status, None, total

    try:
        _, x_basic = _refactorize(a_full, b_eq, basis, vstat, lower_f, upper_f)
    except np.linalg.LinAlgError:
        pass
    x_full = _assemble(x_basic, basis, vstat, lower_f, upper_f)
    x = np.clip(x_full[:n], lower, upper)
    return OPTIMAL, x, total
