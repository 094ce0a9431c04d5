"""Per-group loss/gradient statistics and the affine loss approximation.

For a group G at reference model f, the loss after one weighted step is
approximated by the affine form  a_G - b_G . w  where a_G is the group's
current mean loss and b_G[i] couples sample i's gradient with the group's
average gradient, scaled by alpha / n_task.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import nn
from .buffer import GroupKey, group_keys, group_mask
from .data import TaskData

logger = logging.getLogger(__name__)

GRAD_NORM_MODES = ("both", "group_only", "sample_only", "none")


@dataclass
class GroupStats:
    key: GroupKey
    loss: float
    avg_grad: np.ndarray
    size: int


@dataclass
class LinearLossForm:
    """Affine approximation  value(w) = a - b . w  of a group's loss."""

    a: float
    b: np.ndarray

    def value(self, w: np.ndarray) -> float:
        return float(self.a - self.b @ np.asarray(w, dtype=np.float64))

    def scaled(self, factor: float) -> "LinearLossForm":
        return LinearLossForm(self.a * factor, self.b * factor)


def compute_group_stats(
    model: nn.MlpModel,
    data: TaskData,
    by_sensitive: bool,
    normalize: bool = True,
) -> dict[GroupKey, GroupStats]:
    """Mean loss and average last-layer gradient for every group in ``data``."""
    probs = nn.forward(model, data.x)
    losses = nn.per_sample_cross_entropy(probs, data.y)
    grads = nn.per_sample_last_layer_grads(model, data.x, data.y)
    out: dict[GroupKey, GroupStats] = {}
    for key in group_keys(data, by_sensitive):
        mask = group_mask(data, key)
        g = grads[mask].mean(axis=0)
        if normalize:
            norm = float(np.linalg.norm(g))
            if norm < 1e-15:
                logger.warning("group %s has a zero average gradient", key)
            else:
                g = g / norm
        out[key] = GroupStats(key, float(losses[mask].mean()), g, int(mask.sum()))
    return out


def task_sample_grads(
    model: nn.MlpModel, task: TaskData, normalize: bool = True
) -> np.ndarray:
    """Per-sample last-layer gradients of the current task, optionally unit-norm."""
    grads = nn.per_sample_last_layer_grads(model, task.x, task.y)
    if normalize:
        norms = np.linalg.norm(grads, axis=1, keepdims=True)
        zero = norms[:, 0] < 1e-15
        if zero.any():
            # Confidently-correct samples; their weight has no effect.
            logger.debug("%d samples have zero gradients", int(zero.sum()))
        norms[zero] = 1.0
        grads = grads / norms
    return grads


def linear_forms(
    stats: dict[GroupKey, GroupStats],
    sample_grads: np.ndarray,
    alpha: float,
    n_task: int,
) -> dict[GroupKey, LinearLossForm]:
    """Affine loss forms for each group against the current task's samples.

    b_G[i] = (alpha / n_task) * <avg_grad(G), grad(sample i)>. The normaliser
    is the task size, not the weight total.
    """
    if n_task < 1:
        raise ValueError("n_task must be positive")
    keys = sorted(stats)
    g_mat = np.stack([stats[k].avg_grad for k in keys])
    b_mat = (alpha / n_task) * (g_mat @ sample_grads.T)
    return {
        k: LinearLossForm(stats[k].loss, b_mat[i]) for i, k in enumerate(keys)
    }


def mean_form(forms: list[LinearLossForm]) -> LinearLossForm:
    """Average of affine forms (itself affine)."""
    if not forms:
        raise ValueError("no forms to average")
    a = sum(f.a for f in forms) / len(forms)
    b = sum(f.b for f in forms) / len(forms)
    return LinearLossForm(a, b)


@dataclass
class GroupCounts:
    """Sizes of the (y, z) cells used for demographic-parity scaling."""

    sizes: dict[GroupKey, int]

    @classmethod
    def from_stats(cls, stats: dict[GroupKey, GroupStats]) -> "GroupCounts":
        return cls({k: s.size for k, s in stats.items()})

    def classes(self) -> list[int]:
        return sorted({k[0] for k in self.sizes})

    def z_values(self) -> list[int]:
        return sorted({k[1] for k in self.sizes})

    def m_star(self, z: int) -> int:
        return sum(n for (y, zz), n in self.sizes.items() if zz == z)


def dp_scale(
    forms: dict[GroupKey, LinearLossForm], counts: GroupCounts
) -> tuple[dict[GroupKey, LinearLossForm], dict[int, LinearLossForm]]:
    """Demographic-parity rescaling of subgroup forms.

    Each (y, z) form is scaled by m_yz / m_star_z; the per-class reference
    is the average of a class's scaled forms over its present z cells.
    """
    scaled: dict[GroupKey, LinearLossForm] = {}
    for key, form in forms.items():
        m_star = counts.m_star(key[1])
        if m_star == 0:
            raise ValueError(f"no samples with sensitive value z={key[1]}")
        scaled[key] = form.scaled(counts.sizes[key] / m_star)
    refs: dict[int, LinearLossForm] = {}
    for y in counts.classes():
        cell_forms = [scaled[k] for k in sorted(scaled) if k[0] == y]
        refs[y] = mean_form(cell_forms)
    return scaled, refs
