"""Replay buffer with a fixed per-group budget, filled after each task."""

from __future__ import annotations

import logging

import numpy as np

from .data import TaskData, concat

logger = logging.getLogger(__name__)

GroupKey = tuple[int, ...]


def group_keys(data: TaskData, by_sensitive: bool) -> list[GroupKey]:
    """Distinct (y,) or (y, z) keys present in ``data``, sorted."""
    if by_sensitive:
        if data.z is None:
            raise ValueError("data has no sensitive attribute to group by")
        pairs = {(int(y), int(z)) for y, z in zip(data.y, data.z)}
        return sorted(pairs)
    return sorted({(int(y),) for y in data.y})


def group_mask(data: TaskData, key: GroupKey) -> np.ndarray:
    if len(key) == 1:
        return data.y == key[0]
    return (data.y == key[0]) & (data.z == key[1])


class ReplayBuffer:
    """Stores up to ``per_group`` random samples for every group ever seen.

    Grouping follows the data: (y, z) cells when a sensitive attribute is
    present, plain classes otherwise (or always classes with
    ``group_by="class"``). Selection never mutates the source data.
    """

    def __init__(self, per_group: int, group_by: str = "auto"):
        if per_group < 1:
            raise ValueError("per_group must be positive")
        if group_by not in ("auto", "class"):
            raise ValueError(f"unknown group_by {group_by!r}")
        self.per_group = per_group
        self.group_by = group_by
        self._store: dict[GroupKey, TaskData] = {}

    def __len__(self) -> int:
        return sum(len(v) for v in self._store.values())

    @property
    def group_sizes(self) -> dict[GroupKey, int]:
        return {k: len(v) for k, v in self._store.items()}

    def add_task(self, train: TaskData, rng: np.random.Generator) -> None:
        """Sample ``per_group`` items per group of ``train`` (all if fewer)."""
        by_sensitive = self.group_by == "auto" and train.has_group
        for key in group_keys(train, by_sensitive):
            idx = np.flatnonzero(group_mask(train, key))
            if len(idx) <= self.per_group:
                if len(idx) < self.per_group:
                    logger.warning(
                        "group %s has only %d samples (budget %d); keeping all",
                        key,
                        len(idx),
                        self.per_group,
                    )
                chosen = idx
            else:
                chosen = rng.choice(idx, size=self.per_group, replace=False)
            self._store[key] = train.subset(np.sort(chosen))

    def merged(self) -> TaskData | None:
        """All stored samples, concatenated in sorted group-key order."""
        if not self._store:
            return None
        return concat([self._store[k] for k in sorted(self._store)])
