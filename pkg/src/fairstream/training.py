"""Sequential task training with replay and per-sample weights.

Each epoch recomputes the weight vector against the epoch-start model, then
walks the shuffled task in batches. A batch's update is

    g = (1/n_batch) sum_i w_i grad(d_i)  +  tau * grad(replay batch)

fed through momentum SGD; momentum resets at task boundaries. After a task
finishes (replay methods only), the buffer keeps a random per-group sample
of its training data.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import metrics, nn
from .buffer import ReplayBuffer
from .data import TaskData, TaskStream, concat
from .weighting import WeightingConfig, solve_weights

logger = logging.getLogger(__name__)

METHODS = ("weighted_replay", "uniform_replay", "finetune", "joint")
BINARY_TOL = 1e-6


@dataclass
class TrainConfig:
    epochs: int = 5
    batch_size: int = 64
    lr: float = 0.01
    momentum: float = 0.9
    tau: float = 1.0
    hidden: int = 256
    buffer_per_group: int = 32
    buffer_group_by: str = "auto"
    replay_full_buffer: bool = False
    weight_first_task: bool = False
    weighting: WeightingConfig = field(default_factory=WeightingConfig)


@dataclass
class EpochRecord:
    task: int
    epoch: int
    objective_at_solution: float | None = None
    objective_at_ones: float | None = None
    n_weights: int = 0
    n_binary: int = 0
    # Per-class weight histogram: 12 bins = exact 0, ten interior tenths,
    # exact 1 (within BINARY_TOL).
    weight_bins: dict[int, list[int]] | None = None


@dataclass
class TaskRecord:
    task: int
    accuracies: list[float]
    avg_accuracy: float
    disparities: dict[str, float]
    epochs: list[EpochRecord] = field(default_factory=list)


@dataclass
class RunHistory:
    method: str
    seed: int
    tasks: list[TaskRecord] = field(default_factory=list)

    @property
    def final_avg_accuracy(self) -> float:
        """Mean over tasks l of A_l (itself the mean accuracy after task l)."""
        return float(np.mean([t.avg_accuracy for t in self.tasks]))

    def mean_disparity(self, measure: str) -> float:
        return float(np.mean([t.disparities[measure] for t in self.tasks]))

    def weight_binarity(self) -> tuple[int, int]:
        """(number of weights within 1e-6 of {0,1}, total weights solved)."""
        n_bin = sum(e.n_binary for t in self.tasks for e in t.epochs)
        n_tot = sum(e.n_weights for t in self.tasks for e in t.epochs)
        return n_bin, n_tot


def _batches(n: int, batch_size: int, order: np.ndarray):
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


def weight_histogram(weights: np.ndarray, labels: np.ndarray) -> dict[int, list[int]]:
    """Per-class 12-bin counts: exact 0, ten interior tenths, exact 1."""
    out: dict[int, list[int]] = {}
    for y in np.unique(labels):
        w = weights[labels == y]
        zero = w <= BINARY_TOL
        one = w >= 1.0 - BINARY_TOL
        hist, _ = np.histogram(w[~zero & ~one], bins=10, range=(0.0, 1.0))
        out[int(y)] = [int(zero.sum())] + hist.tolist() + [int(one.sum())]
    return out


def train_stream(
    stream: TaskStream,
    cfg: TrainConfig,
    method: str,
    seed: int,
    weight_fn=None,
) -> tuple[nn.MlpModel, RunHistory]:
    """Train through the stream with the given method; returns model + history.

    ``weight_fn(model, data, buffer_data, task_index, epoch)`` overrides the
    weight computation when given (testing seam); it must return a weight
    vector matching the data.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    # Separate streams per concern so methods sharing a seed see identical
    # initialisation, batch order, and replay draws; they then differ only
    # through the update rule itself.
    seq = np.random.SeedSequence(seed).spawn(4)
    rng_init, rng_shuffle, rng_replay, rng_buffer = (
        np.random.default_rng(s) for s in seq
    )
    d_in = stream.tasks[0].train.x.shape[1]
    model = nn.init_mlp(d_in, cfg.hidden, stream.n_classes, rng_init)
    opt = nn.SgdMomentum(model, cfg.momentum)
    buffer = ReplayBuffer(cfg.buffer_per_group, cfg.buffer_group_by)
    replay = method in ("weighted_replay", "uniform_replay")
    history = RunHistory(method, seed)

    for l, task in enumerate(stream.tasks):
        opt.reset()
        if len(task.train) == 0:
            raise ValueError(f"task {l} has no training data")
        if method == "joint":
            data = concat([t.train for t in stream.tasks[: l + 1]])
        else:
            data = task.train
        buffer_data = buffer.merged() if replay else None
        if replay and l > 0 and buffer_data is None:
            raise RuntimeError(f"replay method reached task {l} with an empty buffer")

        records = []
        for epoch in range(cfg.epochs):
            record = EpochRecord(l, epoch)
            if weight_fn is not None:
                weights = np.asarray(
                    weight_fn(model, data, buffer_data, l, epoch), dtype=np.float64
                )
            elif method == "weighted_replay" and (l > 0 or cfg.weight_first_task):
                result = solve_weights(model, data, buffer_data, cfg.weighting)
                weights = result.weights
                record.objective_at_solution = result.solution.objective
                record.objective_at_ones = result.objective_at_ones
                record.n_weights = len(weights)
                record.n_binary = int(
                    np.sum(
                        (np.abs(weights) <= BINARY_TOL)
                        | (np.abs(weights - 1.0) <= BINARY_TOL)
                    )
                )
                record.weight_bins = weight_histogram(weights, data.y)
            else:
                weights = np.ones(len(data))
            if weights.shape != (len(data),):
                raise ValueError("weight vector does not match the task size")
            records.append(record)

            order = rng_shuffle.permutation(len(data))
            for idx in _batches(len(data), cfg.batch_size, order):
                g = nn.full_grads(model, data.x[idx], data.y[idx], weights[idx])
                if replay and buffer_data is not None and cfg.tau != 0.0:
                    if cfg.replay_full_buffer:
                        ridx = np.arange(len(buffer_data))
                    else:
                        ridx = rng_replay.integers(0, len(buffer_data), size=len(idx))
                    g_prev = nn.full_grads(
                        model, buffer_data.x[ridx], buffer_data.y[ridx]
                    )
                    g = g.add(g_prev.scaled(cfg.tau))
                opt.step(model, g, cfg.lr)

        snap = metrics.snapshot(model, [t.test for t in stream.tasks[: l + 1]])
        disparities = {k: v for k, v in snap.items() if k != "accuracies"}
        history.tasks.append(
            TaskRecord(
                l,
                snap["accuracies"],
                float(np.mean(snap["accuracies"])),
                disparities,
                records,
            )
        )
        if replay:
            buffer.add_task(task.train, rng_buffer)

    return model, history
