"""Brute-force reference implementations used to cross-check the fast paths.

Nothing here shares code with the solver or the gradient routines: the grid
scan evaluates objectives pointwise, the LP oracle enumerates basis/bound
vertices, gradients come from central differences, and stepped losses from
an actual parameter update. Deliberately slow and only fit for small sizes.
"""

from __future__ import annotations

from itertools import combinations, product

import numpy as np

from . import nn
from .lp import AbsObjective, LpProblem


def grid_min(obj: AbsObjective, step: float = 0.01) -> tuple[float, np.ndarray]:
    """Scan w over the full [0,1]^n lattice with the given step.

    Returns (best value, first best w). Refuses n > 4: the lattice grows as
    (1/step + 1)^n and stops being an oracle.
    """
    if obj.n > 4:
        raise ValueError("grid oracle limited to n <= 4")
    levels = np.linspace(0.0, 1.0, round(1.0 / step) + 1)
    grids = np.meshgrid(*([levels] * obj.n), indexing="ij")
    points = np.stack([g.ravel() for g in grids], axis=1)
    values = np.zeros(len(points))
    for u, a, b in obj.abs_terms:
        values += u * np.abs(a - points @ b)
    for v, a, b in obj.lin_terms:
        values += v * (a - points @ b)
    best = int(np.argmin(values))
    return float(values[best]), points[best].copy()


def finite_diff_last_layer_grad(
    model: nn.MlpModel, x: np.ndarray, labels: np.ndarray, eps: float = 1e-5
) -> np.ndarray:
    """Central-difference gradient of mean cross-entropy w.r.t. (w2, b2)."""
    out = np.zeros(model.n_head_params)
    for k in range(model.n_head_params):
        delta = np.zeros(model.n_head_params)
        delta[k] = eps
        up = last_layer_step(model, delta, -1.0)
        down = last_layer_step(model, delta, 1.0)
        loss_up = nn.cross_entropy(nn.forward(up, x), labels)
        loss_down = nn.cross_entropy(nn.forward(down, x), labels)
        out[k] = (loss_up - loss_down) / (2.0 * eps)
    return out


def last_layer_step(model: nn.MlpModel, direction: np.ndarray, eta: float) -> nn.MlpModel:
    """Copy of the model with (w2, b2) moved by -eta * direction."""
    direction = np.asarray(direction, dtype=np.float64)
    if direction.shape != (model.n_head_params,):
        raise ValueError("direction must match the last-layer parameter count")
    stepped = model.copy()
    k = model.w2.size
    stepped.w2 = stepped.w2 - eta * direction[:k].reshape(model.w2.shape)
    stepped.b2 = stepped.b2 - eta * direction[k:]
    return stepped


def exact_loss_after_step(
    model: nn.MlpModel,
    x: np.ndarray,
    labels: np.ndarray,
    direction: np.ndarray,
    eta: float,
) -> float:
    """Loss of (x, labels) after the actual last-layer update -eta*direction."""
    stepped = last_layer_step(model, direction, eta)
    return nn.cross_entropy(nn.forward(stepped, x), labels)


def brute_force_lp(
    problem: LpProblem, cap: int = 2_000_000
) -> tuple[float, np.ndarray] | None:
    """Exact minimum by enumerating basis choices x bound patterns.

    Every vertex of {A x = b, l <= x <= u} fixes some m coordinates as basic
    and parks the rest at a finite bound. Returns None when no feasible
    vertex exists; raises if the enumeration would exceed ``cap`` solves.
    """
    nv = len(problem.c)
    m = len(problem.b_eq)
    n_free = nv - m
    total = 1
    for i in range(m):
        total = total * (nv - i) // (i + 1)
    total *= 2 ** n_free
    if total > cap:
        raise ValueError(f"vertex enumeration too large ({total} > {cap})")

    best_obj, best_x = np.inf, None
    for basic in combinations(range(nv), m):
        cols = problem.a_eq[:, basic]
        if m and abs(np.linalg.det(cols)) < 1e-12:
            continue
        nonbasic = [j for j in range(nv) if j not in basic]
        bound_choices = []
        for j in nonbasic:
            opts = [problem.lower[j]]
            if np.isfinite(problem.upper[j]) and problem.upper[j] != problem.lower[j]:
                opts.append(problem.upper[j])
            bound_choices.append(opts)
        for pattern in product(*bound_choices):
            x = np.empty(nv)
            for j, val in zip(nonbasic, pattern):
                x[j] = val
            rhs = problem.b_eq - problem.a_eq[:, nonbasic] @ np.array(pattern)
            if m:
                xb = np.linalg.solve(cols, rhs)
                x[list(basic)] = xb
                if np.any(xb < problem.lower[list(basic)] - 1e-9) or np.any(
                    xb > problem.upper[list(basic)] + 1e-9
                ):
                    continue
            obj = float(problem.c @ x + problem.offset)
            if obj < best_obj - 1e-15:
                best_obj, best_x = obj, x.copy()
    if best_x is None:
        return None
    return best_obj, best_x
