"""Per-sample training weights from a group-fairness LP.

Given the current task and the replay buffer, build the affine loss
approximations for every group, assemble the chosen fairness measure's
objective (plus a lambda-weighted accuracy term over the current classes),
and minimise it over w in [0,1]^n with the simplex backend. Weights land
on LP vertices, so they are almost always exactly 0 or 1.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from . import nn
from .buffer import GroupKey
from .data import TaskData, concat
from .groups import (
    GRAD_NORM_MODES,
    GroupCounts,
    compute_group_stats,
    dp_scale,
    linear_forms,
    mean_form,
    task_sample_grads,
)
from .lp import AbsObjective, LpSolution, solve_abs_objective

logger = logging.getLogger(__name__)

MEASURES = ("eer", "eo", "dp")


class ConfigError(ValueError):
    """A configuration that cannot be run (bad measure, missing attribute...)."""


@dataclass
class WeightingConfig:
    measure: str = "eer"
    alpha: float = 0.001
    lam: float = 1.0
    grad_norm: str = "both"
    backend: str | None = None

    def __post_init__(self):
        if self.measure not in MEASURES:
            raise ConfigError(f"unknown fairness measure {self.measure!r}")
        if self.grad_norm not in GRAD_NORM_MODES:
            raise ConfigError(f"unknown grad_norm mode {self.grad_norm!r}")
        if self.alpha <= 0:
            raise ConfigError("alpha must be positive")
        if self.lam < 0:
            raise ConfigError("lambda must be nonnegative")


@dataclass
class WeightingResult:
    weights: np.ndarray
    objective: AbsObjective
    solution: LpSolution
    dropped_cells: list[GroupKey] = field(default_factory=list)

    @property
    def objective_at_ones(self) -> float:
        return self.objective.value(np.ones(len(self.weights)))


def build_measure_objective(
    cfg: WeightingConfig,
    forms_class: dict,
    forms_cell: dict | None,
    counts: GroupCounts | None,
    current_classes: list[int],
    n: int,
) -> tuple[AbsObjective, list[GroupKey]]:
    """Assemble the LP objective for the configured measure.

    ``forms_class`` maps (y,) to its affine form; ``forms_cell`` maps (y, z)
    cells (required for eo/dp). Absent cells are skipped and reported.
    """
    obj = AbsObjective(n)
    dropped: list[GroupKey] = []
    acc_w = 0.0 if not current_classes else cfg.lam / len(current_classes)

    if cfg.measure == "eer":
        keys = sorted(forms_class)
        ref = mean_form([forms_class[k] for k in keys])
        for k in keys:
            f = forms_class[k]
            obj.add_abs(1.0 / len(keys), f.a - ref.a, f.b - ref.b)
        for y in current_classes:
            f = forms_class[(y,)]
            obj.add_linear(acc_w, f.a, f.b)
        return obj, dropped

    assert forms_cell is not None and counts is not None
    classes = counts.classes()
    z_values = counts.z_values()
    cell_w = 1.0 / (len(classes) * len(z_values))
    acc_cell_w = acc_w / len(z_values)

    if cfg.measure == "eo":
        for y, z in product(classes, z_values):
            if (y, z) not in forms_cell:
                dropped.append((y, z))
                continue
            f = forms_cell[(y, z)]
            ref = forms_class[(y,)]
            obj.add_abs(cell_w, f.a - ref.a, f.b - ref.b)
    else:  # dp
        scaled, refs = dp_scale(forms_cell, counts)
        for y, z in product(classes, z_values):
            if (y, z) not in scaled:
                dropped.append((y, z))
                continue
            f = scaled[(y, z)]
            ref = refs[y]
            obj.add_abs(cell_w, f.a - ref.a, f.b - ref.b)

    # Accuracy term over current classes, always on the unscaled forms.
    for y in current_classes:
        for z in z_values:
            if (y, z) in forms_cell:
                f = forms_cell[(y, z)]
                obj.add_linear(acc_cell_w, f.a, f.b)

    if dropped:
        logger.warning("dropped %d empty group cells: %s", len(dropped), dropped)
    return obj, dropped


def solve_weights(
    model: nn.MlpModel,
    task: TaskData,
    buffer_data: TaskData | None,
    cfg: WeightingConfig,
) -> WeightingResult:
    """Weights for the current task's samples under the configured measure."""
    if len(task) == 0:
        raise ValueError("empty task")
    pool = task if buffer_data is None else concat([task, buffer_data])
    if cfg.measure in ("eo", "dp") and not pool.has_group:
        raise ConfigError(
            f"measure {cfg.measure!r} needs a sensitive attribute but the data has none"
        )

    norm_group = cfg.grad_norm in ("both", "group_only")
    norm_sample = cfg.grad_norm in ("both", "sample_only")
    sample_grads = task_sample_grads(model, task, normalize=norm_sample)
    n = len(task)

    stats_class = compute_group_stats(model, pool, by_sensitive=False, normalize=norm_group)
    forms_class = linear_forms(stats_class, sample_grads, cfg.alpha, n)
    current_classes = sorted(int(y) for y in np.unique(task.y))

    forms_cell = None
    counts = None
    if cfg.measure in ("eo", "dp"):
        stats_cell = compute_group_stats(model, pool, by_sensitive=True, normalize=norm_group)
        forms_cell = linear_forms(stats_cell, sample_grads, cfg.alpha, n)
        counts = GroupCounts.from_stats(stats_cell)

    obj, dropped = build_measure_objective(
        cfg, forms_class, forms_cell, counts, current_classes, n
    )
    weights, sol = solve_abs_objective(obj, backend=cfg.backend)
    return WeightingResult(np.clip(weights, 0.0, 1.0), obj, sol, dropped)
