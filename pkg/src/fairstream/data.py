"""Datasets, task streams, and the CSV / IDX ingest paths.

Data is held columnar: ``TaskData`` wraps (x, y, z) arrays, a ``TaskDataset``
pairs a train and test split for one task, and a ``TaskStream`` is the
ordered list of tasks with disjoint class sets that the trainer consumes.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)

IDX_IMAGE_MAGIC = 2051
IDX_LABEL_MAGIC = 2049

# Means of the three-Gaussian toy stream (identity covariance).
TOY_MEANS = np.array([[-2.0, -2.0], [2.0, 4.0], [4.0, 2.0]])


class ParseError(ValueError):
    """Malformed external data (CSV or IDX)."""


@dataclass
class Sample:
    features: np.ndarray
    label: int
    group: int | None = None


@dataclass
class TaskData:
    """Columnar sample store; ``z`` is the optional sensitive attribute."""

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray | None = None

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.x.ndim != 2:
            raise ValueError("features must be a 2-d array")
        if self.y.shape != (self.x.shape[0],):
            raise ValueError("labels must match the number of rows")
        if self.z is not None:
            self.z = np.asarray(self.z, dtype=np.int64)
            if self.z.shape != (self.y.shape[0],):
                raise ValueError("groups must match the number of rows")

    def __len__(self) -> int:
        return self.x.shape[0]

    @property
    def has_group(self) -> bool:
        return self.z is not None

    def subset(self, idx: np.ndarray) -> "TaskData":
        z = self.z[idx] if self.z is not None else None
        return TaskData(self.x[idx], self.y[idx], z)

    def select_classes(self, classes) -> "TaskData":
        return self.subset(np.isin(self.y, list(classes)))

    def to_samples(self) -> list[Sample]:
        return [
            Sample(
                self.x[i].copy(),
                int(self.y[i]),
                int(self.z[i]) if self.z is not None else None,
            )
            for i in range(len(self))
        ]


def from_samples(samples: list[Sample]) -> TaskData:
    if not samples:
        raise ValueError("empty sample list")
    has_group = samples[0].group is not None
    if any((s.group is not None) != has_group for s in samples):
        raise ValueError("mixed presence of the group attribute")
    x = np.stack([np.asarray(s.features, dtype=np.float64) for s in samples])
    y = np.array([s.label for s in samples])
    z = np.array([s.group for s in samples]) if has_group else None
    return TaskData(x, y, z)


def concat(parts: list[TaskData]) -> TaskData:
    if not parts:
        raise ValueError("nothing to concatenate")
    has_group = parts[0].has_group
    if any(p.has_group != has_group for p in parts):
        raise ValueError("mixed presence of the group attribute")
    x = np.concatenate([p.x for p in parts])
    y = np.concatenate([p.y for p in parts])
    z = np.concatenate([p.z for p in parts]) if has_group else None
    return TaskData(x, y, z)


@dataclass
class TaskDataset:
    train: TaskData
    test: TaskData
    classes: tuple[int, ...]


@dataclass
class TaskStream:
    tasks: list[TaskDataset]
    n_classes: int

    @property
    def has_group(self) -> bool:
        return self.tasks[0].train.has_group

    @property
    def z_values(self) -> list[int]:
        if not self.has_group:
            return []
        vals: set[int] = set()
        for t in self.tasks:
            vals.update(int(z) for z in np.unique(t.train.z))
        return sorted(vals)

    def classes_until(self, task_index: int) -> list[int]:
        seen: list[int] = []
        for t in self.tasks[: task_index + 1]:
            seen.extend(t.classes)
        return sorted(seen)


def stream_to_data(stream: TaskStream) -> tuple[TaskData, TaskData]:
    """Flatten a stream back to (train, test) in task order."""
    train = concat([t.train for t in stream.tasks])
    test = concat([t.test for t in stream.tasks])
    return train, test


def _make_stream(train: TaskData, test: TaskData, class_chunks) -> TaskStream:
    tasks = [
        TaskDataset(train.select_classes(c), test.select_classes(c), tuple(c))
        for c in class_chunks
    ]
    return TaskStream(tasks, sum(len(c) for c in class_chunks))


def gen_toy_gaussians(
    n_train_per_class: int = 500,
    n_test_per_class: int = 500,
    seed: int = 0,
    grouped: bool = False,
) -> TaskStream:
    """Three unit-variance Gaussian blobs as a fixed two-task stream.

    Ungrouped: three classes, task 1 = classes {0, 1}, task 2 = {2}. With
    ``grouped=True`` the blobs fold into two classes with a binary sensitive
    attribute (blob 0 -> (y=0, z=0), blob 1 -> (y=0, z=1),
    blob 2 -> (y=1, z=1)) and the tasks are {0} then {1}.
    """
    rng = np.random.default_rng(seed)

    def draw(n_per_class: int) -> TaskData:
        xs, ys = [], []
        for c, mean in enumerate(TOY_MEANS):
            xs.append(mean + rng.standard_normal((n_per_class, 2)))
            ys.append(np.full(n_per_class, c))
        x, blob = np.concatenate(xs), np.concatenate(ys)
        if not grouped:
            return TaskData(x, blob)
        y = np.where(blob <= 1, 0, 1)
        z = np.where(blob == 0, 0, 1)
        return TaskData(x, y, z)

    train, test = draw(n_train_per_class), draw(n_test_per_class)
    chunks = [(0,), (1,)] if grouped else [(0, 1), (2,)]
    return _make_stream(train, test, chunks)


def gen_color_biased(
    n_per_class: int,
    n_classes: int = 10,
    n_features: int = 8,
    bias_train: float = 0.95,
    bias_test: float = 0.5,
    seed: int = 0,
    n_test_per_class: int | None = None,
    n_tasks: int | None = None,
) -> TaskStream:
    """Gaussian class blobs with an appended class-correlated bias channel.

    Each class has a canonical channel value; with probability ``bias`` a
    sample carries its own class's value (z=1), otherwise the value of a
    random other class (z=0). High train bias and 0.5 test bias give the
    spurious-correlation setup.
    """
    if not 0.0 <= bias_train <= 1.0 or not 0.0 <= bias_test <= 1.0:
        raise ValueError("bias must be in [0, 1]")
    rng = np.random.default_rng(seed)
    means = rng.standard_normal((n_classes, n_features)) * 3.0
    if n_test_per_class is None:
        n_test_per_class = n_per_class

    def draw(n: int, bias: float) -> TaskData:
        xs, ys, zs = [], [], []
        for c in range(n_classes):
            base = means[c] + rng.standard_normal((n, n_features))
            z = (rng.random(n) < bias).astype(np.int64)
            other = rng.integers(0, n_classes - 1, size=n)
            other[other >= c] += 1
            channel = np.where(z == 1, float(c), other.astype(np.float64))
            xs.append(np.concatenate([base, channel[:, None]], axis=1))
            ys.append(np.full(n, c))
            zs.append(z)
        return TaskData(np.concatenate(xs), np.concatenate(ys), np.concatenate(zs))

    train = draw(n_per_class, bias_train)
    test = draw(n_test_per_class, bias_test)
    if n_tasks is None:
        n_tasks = max(1, n_classes // 2)
    return split_tasks(train, test, n_tasks)


def split_tasks(train: TaskData, test: TaskData, n_tasks: int) -> TaskStream:
    """Partition classes into ``n_tasks`` contiguous, disjoint chunks.

    Classes must be 0..C-1. When C is not divisible by n_tasks the remainder
    classes go to the last task (logged as a warning).
    """
    classes = np.union1d(np.unique(train.y), np.unique(test.y))
    n_classes = len(classes)
    if not np.array_equal(classes, np.arange(n_classes)):
        raise ValueError("class labels must be contiguous 0..C-1")
    if n_tasks < 1 or n_tasks > n_classes:
        raise ValueError(f"cannot split {n_classes} classes into {n_tasks} tasks")
    per_task = n_classes // n_tasks
    if n_classes % n_tasks:
        logger.warning(
            "%d classes do not divide into %d tasks; last task takes %d extra",
            n_classes,
            n_tasks,
            n_classes % n_tasks,
        )
    tasks = []
    for t in range(n_tasks):
        lo = t * per_task
        hi = (t + 1) * per_task if t < n_tasks - 1 else n_classes
        chunk = tuple(range(lo, hi))
        tasks.append(
            TaskDataset(
                train.select_classes(chunk), test.select_classes(chunk), chunk
            )
        )
    return TaskStream(tasks, n_classes)


# -- CSV ---------------------------------------------------------------

def load_csv(path, has_group: bool = False) -> TaskData:
    """Rows are ``f1,...,fd,label`` or ``f1,...,fd,label,group``.

    A single non-numeric first row is treated as a header and skipped.
    """
    rows: list[list[str]] = []
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise ParseError(f"{path}: no data rows")
    start = 0
    first = lines[0].split(",")
    try:
        float(first[0])
    except ValueError:
        start = 1
    width = None
    for lineno, ln in enumerate(lines[start:], start=start + 1):
        cells = [c.strip() for c in ln.split(",")]
        if width is None:
            width = len(cells)
            min_cols = 3 if has_group else 2
            if width < min_cols:
                raise ParseError(f"{path}:{lineno}: expected at least {min_cols} columns")
        elif len(cells) != width:
            raise ParseError(
                f"{path}:{lineno}: expected {width} columns, got {len(cells)}"
            )
        rows.append(cells)
    if not rows:
        raise ParseError(f"{path}: no data rows")
    n_meta = 2 if has_group else 1
    try:
        x = np.array([[float(c) for c in r[: width - n_meta]] for r in rows])
        y = np.array([int(r[width - n_meta]) for r in rows])
        z = np.array([int(r[-1]) for r in rows]) if has_group else None
    except ValueError as exc:
        raise ParseError(f"{path}: non-numeric cell ({exc})") from exc
    if y.min() < 0 or (z is not None and z.min() < 0):
        raise ParseError(f"{path}: labels and groups must be non-negative")
    return TaskData(x, y, z)


def save_csv(path, data: TaskData) -> None:
    """Inverse of ``load_csv``; floats are written with round-trip precision."""
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(len(data)):
            cells = [repr(float(v)) for v in data.x[i]]
            cells.append(str(int(data.y[i])))
            if data.z is not None:
                cells.append(str(int(data.z[i])))
            fh.write(",".join(cells) + "\n")


# -- IDX ---------------------------------------------------------------

def _read_exact(fh, n: int, path, what: str) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise ParseError(f"{path}: truncated {what}")
    return buf


def load_idx_images(path) -> np.ndarray:
    """IDX image file -> (n, rows*cols) float64 scaled to [0, 1].

    Layout: uint32 big-endian magic 2051, then n/rows/cols, then ubyte pixels.
    """
    with open(path, "rb") as fh:
        magic, n, rows, cols = struct.unpack(">llll", _read_exact(fh, 16, path, "header"))
        if magic != IDX_IMAGE_MAGIC:
            raise ParseError(f"{path}: bad image magic {magic}")
        raw = _read_exact(fh, n * rows * cols, path, "pixel data")
    pixels = np.frombuffer(raw, dtype=np.uint8).astype(np.float64) / 255.0
    return pixels.reshape(n, rows * cols)


def load_idx_labels(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic, n = struct.unpack(">ll", _read_exact(fh, 8, path, "header"))
        if magic != IDX_LABEL_MAGIC:
            raise ParseError(f"{path}: bad label magic {magic}")
        raw = _read_exact(fh, n, path, "label data")
    return np.frombuffer(raw, dtype=np.uint8).astype(np.int64)


def load_idx_pair(images_path, labels_path) -> TaskData:
    x = load_idx_images(images_path)
    y = load_idx_labels(labels_path)
    if len(x) != len(y):
        raise ParseError("image and label counts differ")
    return TaskData(x, y)
