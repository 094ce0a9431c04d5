"""Bounded-variable two-phase primal simplex, pure numpy backend.

Solves  min c.x  s.t.  A x = b,  lower <= x <= upper  on a dense tableau.
Nonbasic variables rest at a finite bound; the ratio test allows bound
flips; Phase 1 minimises the total infeasibility carried by signed
artificial columns. Pricing is Dantzig (most negative, lowest index on
ties) with a switch to Bland's rule after a stall, which guarantees
termination. The compiled backend in ``_simplex.pyx`` implements the same
algorithm with the same pivot rules.

Status codes: 0 optimal, 1 infeasible, 2 unbounded, 3 iteration limit.
"""

from __future__ import annotations

import numpy as np

OPTIMAL = 0
INFEASIBLE = 1
UNBOUNDED = 2
ITERATION_LIMIT = 3

AT_LO, AT_UP, BASIC = 0, 1, 2

_PIVOT_TOL = 1e-10
_STALL_EPS = 1e-12


def _assemble(x_basic, basis, vstat, lower, upper):
    x = np.where(vstat == AT_UP, upper, lower).astype(np.float64)
    x[basis] = x_basic
    return x


def _iterate(costs, tableau, x_basic, basis, vstat, lower, upper,
             tol_opt, max_iter, stall_limit):
    """Run simplex pivots until optimal for the given costs.

    Mutates tableau/x_basic/basis/vstat in place. Returns (status, n_iter).
    """
    m, nv = tableau.shape
    bland = False
    stall = 0
    obj_prev = np.inf
    for it in range(max_iter):
        # Reduced costs; basic entries are forced to zero to keep them
        # out of the pricing step regardless of accumulated roundoff.
        d = costs - costs[basis] @ tableau if m else costs.copy()
        d[basis] = 0.0
        viol = np.where(
            (vstat == AT_LO) & (d < -tol_opt),
            -d,
            np.where((vstat == AT_UP) & (d > tol_opt), d, 0.0),
        )
        if not viol.any():
            return OPTIMAL, it
        enter = int(np.flatnonzero(viol)[0]) if bland else int(np.argmax(viol))
        direction = 1.0 if vstat[enter] == AT_LO else -1.0

        # Ratio test: the entering variable moves by step >= 0 towards its
        # opposite bound; basic variables move by -direction * column.
        step = upper[enter] - lower[enter]
        leave = -1
        leave_stat = AT_LO
        if m:
            col = direction * tableau[:, enter]
            for i in range(m):
                ci = col[i]
                bi = basis[i]
                if ci > _PIVOT_TOL:
                    cand = (x_basic[i] - lower[bi]) / ci
                    hit = AT_LO
                elif ci < -_PIVOT_TOL:
                    if not np.isfinite(upper[bi]):
                        continue
                    cand = (upper[bi] - x_basic[i]) / (-ci)
                    hit = AT_UP
                else:
                    continue
                cand = max(cand, 0.0)
                if cand < step - 1e-12 or (cand < step + 1e-12 and leave >= 0
                                           and basis[i] < basis[leave]):
                    step = cand
                    leave = i
                    leave_stat = hit
        if not np.isfinite(step):
            return UNBOUNDED, it

        if leave < 0:
            # Bound flip: the entering variable crosses to its other bound.
            if m:
                x_basic -= step * col
            vstat[enter] = AT_UP if vstat[enter] == AT_LO else AT_LO
        else:
            x_basic -= step * col
            entering_value = (
                (lower[enter] if vstat[enter] == AT_LO else upper[enter])
                + direction * step
            )
            out = basis[leave]
            vstat[out] = leave_stat
            pivot = tableau[leave, enter]
            tableau[leave] /= pivot
            factors = tableau[:, enter].copy()
            factors[leave] = 0.0
            tableau -= np.outer(factors, tableau[leave])
            x_basic[leave] = entering_value
            basis[leave] = enter
            vstat[enter] = BASIC

        obj = costs @ _assemble(x_basic, basis, vstat, lower, upper)
        if obj_prev - obj < _STALL_EPS:
            stall += 1
            if stall >= stall_limit:
                bland = True
        else:
            stall = 0
            bland = False
        obj_prev = obj
    return ITERATION_LIMIT, max_iter


def _refactorize(a_full, b, basis, vstat, lower, upper):
    """Recompute tableau and basic values from scratch for the current basis."""
    m = len(b)
    bcols = a_full[:, basis]
    tableau = np.linalg.solve(bcols, a_full)
    x_nb = np.where(vstat == AT_UP, upper, lower).astype(np.float64)
    x_nb[basis] = 0.0
    x_basic = np.linalg.solve(bcols, b - a_full @ x_nb)
    return tableau, x_basic


def solve(c, a_eq, b_eq, lower, upper, tol_feas=1e-8, tol_opt=1e-9,
          max_iter=0, stall_limit=256):
    """Solve the bounded LP. Returns (status, x, n_iter)."""
    c = np.asarray(c, dtype=np.float64)
    a_eq = np.asarray(a_eq, dtype=np.float64).reshape(len(b_eq), len(c))
    b_eq = np.asarray(b_eq, dtype=np.float64)
    lower = np.asarray(lower, dtype=np.float64)
    upper = np.asarray(upper, dtype=np.float64)
    if not np.all(np.isfinite(lower)):
        raise ValueError("all lower bounds must be finite")
    if np.any(upper < lower):
        raise ValueError("upper bound below lower bound")
    n = len(c)
    m = len(b_eq)
    if max_iter <= 0:
        max_iter = 100 * (n + m) + 1000

    total_iters = 0
    if m == 0:
        # Pure bound minimisation; phase 2 on the structural variables alone.
        vstat = np.zeros(n, dtype=np.int64)
        basis = np.zeros(0, dtype=np.int64)
        tableau = np.zeros((0, n))
        x_basic = np.zeros(0)
        status, it = _iterate(c, tableau, x_basic, basis, vstat, lower, upper,
                              tol_opt, max_iter, stall_limit)
        if status != OPTIMAL:
            return status, None, it
        return OPTIMAL, np.clip(_assemble(x_basic, basis, vstat, lower, upper),
                                lower, upper), it

    # Start structural variables at their lower bound; signed artificial
    # columns absorb the residual so the initial basis is the identity.
    x0 = lower.copy()
    resid = b_eq - a_eq @ x0
    signs = np.where(resid >= 0.0, 1.0, -1.0)
    a_full = np.concatenate([a_eq, np.diag(signs)], axis=1)
    nv = n + m
    lower_f = np.concatenate([lower, np.zeros(m)])
    upper_f = np.concatenate([upper, np.full(m, np.inf)])
    vstat = np.zeros(nv, dtype=np.int64)
    basis = np.arange(n, nv, dtype=np.int64)
    vstat[basis] = BASIC
    tableau = signs[:, None] * a_full
    x_basic = np.abs(resid)

    phase1_costs = np.concatenate([np.zeros(n), np.ones(m)])
    status, it1 = _iterate(phase1_costs, tableau, x_basic, basis, vstat,
                           lower_f, upper_f, tol_opt, max_iter, stall_limit)
    total_iters += it1
    if status == ITERATION_LIMIT:
        return status, None, total_iters
    x_full = _assemble(x_basic, basis, vstat, lower_f, upper_f)
    if phase1_costs @ x_full > tol_feas * (1.0 + np.abs(b_eq).max()):
        return INFEASIBLE, None, total_iters

    # Pin artificials to zero; any still basic are degenerate and the ratio
    # test keeps them there.
    upper_f[n:] = 0.0
    try:
        tableau, x_basic = _refactorize(a_full, b_eq, basis, vstat, lower_f, upper_f)
    except np.linalg.LinAlgError:
        pass  # keep the running tableau; refactorisation is only hygiene

    phase2_costs = np.concatenate([c, np.zeros(m)])
    status, it2 = _iterate(phase2_costs, tableau, x_basic, basis, vstat,
                           lower_f, upper_f, tol_opt, max_iter, stall_limit)
    total_iters += it2
    if status != OPTIMAL:
        return status, None, total_iters

    try:
        _, x_basic = _refactorize(a_full, b_eq, basis, vstat, lower_f, upper_f)
    except np.linalg.LinAlgError:
        pass
    x_full = _assemble(x_basic, basis, vstat, lower_f, upper_f)
    x = np.clip(x_full[:n], lower, upper)
    return OPTIMAL, x, total_iters
