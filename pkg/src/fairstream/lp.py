"""Linear programs over sample weights: abs-value transform and solving.

An ``AbsObjective`` is a weighted sum of absolute deviations and plain
linear terms in the affine forms a_k - b_k . w with w in [0, 1]^n. The
standard substitution y_k = y_k+ - y_k- (both nonnegative) turns each
absolute term into an equality constraint plus a linear cost, giving a
bounded-variable LP that a two-phase simplex solves exactly. At a
minimum the solver never sets both y+ and y- positive, so no explicit
complementarity constraint is needed.

Two interchangeable backends implement the identical pivot rules: the
Cython extension ``fairstream._simplex`` (used when importable) and the
pure-numpy ``fairstream._simplex_py``. Setting the environment variable
``FAIRSTREAM_PURE_PY=1`` forces the fallback.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field

import numpy as np

from . import _simplex_py

logger = logging.getLogger(__name__)

try:  # pragma: no cover - exercised only when the extension is built
    from . import _simplex as _compiled
except ImportError:  # pragma: no cover
    _compiled = None

_FORCE_PURE = os.environ.get("FAIRSTREAM_PURE_PY", "") not in ("", "0")

_STATUS_NAMES = {
    _simplex_py.OPTIMAL: "optimal",
    _simplex_py.INFEASIBLE: "infeasible",
    _simplex_py.UNBOUNDED: "unbounded",
}


class LpSolverError(RuntimeError):
    """The solver hit its iteration cap or produced an invalid point."""


def default_backend() -> str:
    if _compiled is not None and not _FORCE_PURE:
        return "compiled"
    return "python"


def available_backends() -> list[str]:
    backends = ["python"]
    if _compiled is not None:
        backends.insert(0, "compiled")
    return backends


@dataclass
class AbsObjective:
    """min  sum_k u_k |a_k - b_k.w|  +  sum_j v_j (c_j - d_j.w),  w in [0,1]^n."""

    n: int
    abs_terms: list[tuple[float, float, np.ndarray]] = field(default_factory=list)
    lin_terms: list[tuple[float, float, np.ndarray]] = field(default_factory=list)

    def add_abs(self, weight: float, a: float, b: np.ndarray) -> None:
        self._check(weight, b)
        self.abs_terms.append((float(weight), float(a), np.asarray(b, dtype=np.float64)))

    def add_linear(self, weight: float, a: float, b: np.ndarray) -> None:
        self._check(weight, b)
        self.lin_terms.append((float(weight), float(a), np.asarray(b, dtype=np.float64)))

    def _check(self, weight: float, b: np.ndarray) -> None:
        if weight < 0:
            raise ValueError("term weights must be nonnegative")
        if np.shape(b) != (self.n,):
            raise ValueError(f"coefficient vector must have shape ({self.n},)")

    def value(self, w: np.ndarray) -> float:
        w = np.asarray(w, dtype=np.float64)
        if w.shape != (self.n,):
            raise ValueError(f"w must have shape ({self.n},)")
        total = 0.0
        for u, a, b in self.abs_terms:
            total += u * abs(a - b @ w)
        for v, a, b in self.lin_terms:
            total += v * (a - b @ w)
        return float(total)

    def lipschitz_bound(self) -> float:
        """An L-infinity-to-value Lipschitz constant (L2 on w)."""
        total = sum(u * np.linalg.norm(b) for u, _, b in self.abs_terms)
        lin = np.zeros(self.n)
        for v, _, b in self.lin_terms:
            lin = lin + v * b
        return float(total + np.linalg.norm(lin))


@dataclass
class LpProblem:
    """min c.x + offset  s.t.  a_eq x = b_eq,  lower <= x <= upper."""

    c: np.ndarray
    a_eq: np.ndarray
    b_eq: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    offset: float = 0.0
    n_weights: int = 0
    var_names: list[str] = field(default_factory=list)


@dataclass
class LpSolution:
    status: str
    x: np.ndarray | None
    objective: float | None
    n_iter: int


def build_abs_lp(obj: AbsObjective) -> LpProblem:
    """Lower the abs-value objective to a bounded-variable LP.

    Variables are [w_1..w_n, y+_1..y+_K, y-_1..y-_K]; each absolute term k
    contributes the equality  b_k.w + y+_k - y-_k = a_k  and cost
    u_k (y+_k + y-_k).
    """
    n, k = obj.n, len(obj.abs_terms)
    nv = n + 2 * k
    c = np.zeros(nv)
    for v, _, b in obj.lin_terms:
        c[:n] -= v * b
    offset = sum(v * a for v, a, _ in obj.lin_terms)
    a_eq = np.zeros((k, nv))
    b_eq = np.zeros(k)
    for i, (u, a, b) in enumerate(obj.abs_terms):
        a_eq[i, :n] = b
        a_eq[i, n + i] = 1.0
        a_eq[i, n + k + i] = -1.0
        b_eq[i] = a
        c[n + i] = u
        c[n + k + i] = u
    lower = np.zeros(nv)
    upper = np.concatenate([np.ones(n), np.full(2 * k, np.inf)])
    names = (
        [f"w{i}" for i in range(n)]
        + [f"y{i}+" for i in range(k)]
        + [f"y{i}-" for i in range(k)]
    )
    return LpProblem(c, a_eq, b_eq, lower, upper, offset, n, names)


def solve_lp(problem: LpProblem, backend: str | None = None) -> LpSolution:
    """Solve with the chosen backend; statuses: optimal/infeasible/unbounded.

    Raises LpSolverError on an iteration-cap stall or an infeasible
    "optimal" point, with basic diagnostics in the message.
    """
    if backend is None:
        backend = default_backend()
    if backend == "compiled":
        if _compiled is None:
            raise LpSolverError("compiled backend requested but not built")
        status, x, n_iter = _compiled.solve(
            np.ascontiguousarray(problem.c, dtype=np.float64),
            np.ascontiguousarray(problem.a_eq, dtype=np.float64),
            np.ascontiguousarray(problem.b_eq, dtype=np.float64),
            np.ascontiguousarray(problem.lower, dtype=np.float64),
            np.ascontiguousarray(problem.upper, dtype=np.float64),
        )
    elif backend == "python":
        status, x, n_iter = _simplex_py.solve(
            problem.c, problem.a_eq, problem.b_eq, problem.lower, problem.upper
        )
    else:
        raise ValueError(f"unknown backend {backend!r}")

    if status == _simplex_py.ITERATION_LIMIT:
        raise LpSolverError(
            f"simplex hit the iteration cap after {n_iter} pivots "
            f"({len(problem.c)} vars, {len(problem.b_eq)} rows)"
        )
    name = _STATUS_NAMES[status]
    if name != "optimal":
        return LpSolution(name, None, None, n_iter)

    resid = problem.a_eq @ x - problem.b_eq if len(problem.b_eq) else np.zeros(0)
    tol = 1e-8 * (1.0 + (np.abs(problem.b_eq).max() if len(problem.b_eq) else 0.0))
    if len(resid) and np.abs(resid).max() > tol:
        raise LpSolverError(
            f"solution violates equalities (max residual {np.abs(resid).max():.3e})"
        )
    return LpSolution("optimal", x, float(problem.c @ x + problem.offset), n_iter)


def solve_abs_objective(
    obj: AbsObjective, backend: str | None = None
) -> tuple[np.ndarray, LpSolution]:
    """Minimise an AbsObjective; returns (w*, full LP solution)."""
    problem = build_abs_lp(obj)
    sol = solve_lp(problem, backend=backend)
    if sol.status != "optimal":
        raise LpSolverError(f"weight LP came back {sol.status}")
    return sol.x[: obj.n].copy(), sol


def format_lp(problem: LpProblem) -> str:
    """Human-readable dump of an LpProblem for debugging."""
    names = problem.var_names or [f"x{i}" for i in range(len(problem.c))]

    def row(coeffs) -> str:
        parts = [
            f"{coeffs[j]:+g} {names[j]}"
            for j in range(len(coeffs))
            if abs(coeffs[j]) > 1e-15
        ]
        return " ".join(parts) if parts else "0"

    lines = [f"minimize {row(problem.c)} + {problem.offset:g}", "subject to"]
    for i in range(len(problem.b_eq)):
        lines.append(f"  {row(problem.a_eq[i])} = {problem.b_eq[i]:g}")
    lines.append("bounds")
    for j, name in enumerate(names):
        up = problem.upper[j]
        up_s = "inf" if not np.isfinite(up) else f"{up:g}"
        lines.append(f"  {problem.lower[j]:g} <= {name} <= {up_s}")
    return "\n".join(lines) + "\n"


def write_lp(problem: LpProblem, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_lp(problem))
