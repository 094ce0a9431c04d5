"""Accuracy and group-fairness disparity metrics on prediction sets.

Disparities compare a cell's empirical rate against its reference rate and
average the absolute gaps over cells. Cells with no samples are dropped and
the denominator renormalised to the evaluated cells.
"""

from __future__ import annotations

import numpy as np

from . import nn
from .data import TaskData


def predict(model: nn.MlpModel, x: np.ndarray) -> np.ndarray:
    return np.argmax(nn.forward(model, x), axis=1)


def accuracy(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    y_true, y_pred = _check_pair(y_true, y_pred)
    return float(np.mean(y_pred == y_true))


def _check_pair(y_true, y_pred):
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape or y_true.ndim != 1 or len(y_true) == 0:
        raise ValueError("need matching non-empty label/prediction vectors")
    return y_true, y_pred


def error_rate_disparity(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    """Mean over classes of |Pr(wrong | y) - Pr(wrong)|."""
    y_true, y_pred = _check_pair(y_true, y_pred)
    wrong = y_pred != y_true
    overall = wrong.mean()
    gaps = [
        abs(wrong[y_true == y].mean() - overall) for y in np.unique(y_true)
    ]
    return float(np.mean(gaps))


def equalized_odds_disparity(
    y_true: np.ndarray, y_pred: np.ndarray, z: np.ndarray
) -> float:
    """Mean over (y, z) cells of |Pr(correct | y, z) - Pr(correct | y)|."""
    y_true, y_pred = _check_pair(y_true, y_pred)
    z = _check_z(z, y_true)
    correct = y_pred == y_true
    gaps = []
    for y in np.unique(y_true):
        in_class = y_true == y
        class_rate = correct[in_class].mean()
        for zv in np.unique(z):
            cell = in_class & (z == zv)
            if not cell.any():
                continue
            gaps.append(abs(correct[cell].mean() - class_rate))
    return float(np.mean(gaps))


def demographic_parity_disparity(
    y_true: np.ndarray, y_pred: np.ndarray, z: np.ndarray
) -> float:
    """Mean over (y, z) of |Pr(pred = y | z) - Pr(pred = y)|."""
    y_true, y_pred = _check_pair(y_true, y_pred)
    z = _check_z(z, y_true)
    gaps = []
    for y in np.unique(y_true):
        overall = (y_pred == y).mean()
        for zv in np.unique(z):
            in_group = z == zv
            gaps.append(abs((y_pred[in_group] == y).mean() - overall))
    return float(np.mean(gaps))


def _check_z(z, y_true):
    if z is None:
        raise ValueError("this disparity needs the sensitive attribute")
    z = np.asarray(z)
    if z.shape != y_true.shape:
        raise ValueError("sensitive attribute must match the labels")
    return z


DISPARITY_FN = {
    "eer": lambda yt, yp, z: error_rate_disparity(yt, yp),
    "eo": equalized_odds_disparity,
    "dp": demographic_parity_disparity,
}


def disparity(measure: str, y_true, y_pred, z=None) -> float:
    if measure not in DISPARITY_FN:
        raise ValueError(f"unknown measure {measure!r}")
    return DISPARITY_FN[measure](y_true, y_pred, z)


def task_averaged_accuracy(per_task: list[list[float]]) -> tuple[list[float], float]:
    """A_l = mean of a_{l,t} over tasks t <= l; returns ([A_1..A_L], mean A_l).

    ``per_task[l]`` holds the accuracies measured after finishing task l,
    one entry per seen task.
    """
    if not per_task:
        raise ValueError("no accuracy rows")
    a_l = []
    for l, row in enumerate(per_task):
        if len(row) != l + 1:
            raise ValueError(f"row {l} must have {l + 1} accuracies, got {len(row)}")
        a_l.append(float(np.mean(row)))
    return a_l, float(np.mean(a_l))


def snapshot(model: nn.MlpModel, test_sets: list[TaskData]) -> dict:
    """Per-task accuracies plus disparities on the union of the test sets."""
    accs = []
    for ts in test_sets:
        accs.append(accuracy(ts.y, predict(model, ts.x)))
    xs = np.concatenate([ts.x for ts in test_sets])
    ys = np.concatenate([ts.y for ts in test_sets])
    preds = predict(model, xs)
    out = {"accuracies": accs, "eer": error_rate_disparity(ys, preds)}
    if all(ts.has_group for ts in test_sets):
        zs = np.concatenate([ts.z for ts in test_sets])
        out["eo"] = equalized_odds_disparity(ys, preds, zs)
        out["dp"] = demographic_parity_disparity(ys, preds, zs)
    return out
