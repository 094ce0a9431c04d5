"""Shared test fixtures and small builders."""

import logging

import numpy as np
import pytest

from fairstream import nn
from fairstream.data import TaskData


def pytest_configure(config):
    # Clamp/zero-gradient warnings are exercised deliberately in several
    # tests; keep the output readable.
    logging.getLogger("fairstream").setLevel(logging.ERROR)


def make_model(rng, n_inputs=3, n_hidden=5, n_classes=3):
    return nn.init_mlp(n_inputs, n_hidden, n_classes, rng)


def make_task(rng, n=12, n_inputs=3, n_classes=3, with_z=False, classes=None):
    """Random TaskData with labels drawn from ``classes`` (default all)."""
    x = rng.normal(size=(n, n_inputs))
    pool = np.asarray(classes if classes is not None else range(n_classes))
    y = pool[rng.integers(0, len(pool), size=n)]
    z = rng.integers(0, 2, size=n) if with_z else None
    return TaskData(x, y, z)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
