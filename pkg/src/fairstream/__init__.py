"""Fairness-aware sample weighting for class-incremental learning.

Trains a shared-head classifier over a sequence of class-disjoint tasks
with a small replay buffer, and counters unfair forgetting by weighting
each current-task sample through a linear program built from per-group
loss/gradient statistics (error-rate, equalized-odds, or
demographic-parity objectives).
"""

from .buffer import ReplayBuffer
from .data import TaskData, TaskDataset, TaskStream
from .lp import AbsObjective, LpProblem, LpSolution, LpSolverError, solve_lp
from .metrics import (
    demographic_parity_disparity,
    equalized_odds_disparity,
    error_rate_disparity,
)
from .nn import MlpModel, init_mlp
from .training import RunHistory, TrainConfig, train_stream
from .weighting import ConfigError, WeightingConfig, solve_weights

__version__ = "0.1.0"

__all__ = [
    "AbsObjective",
    "ConfigError",
    "LpProblem",
    "LpSolution",
    "LpSolverError",
    "MlpModel",
    "ReplayBuffer",
    "RunHistory",
    "TaskData",
    "TaskDataset",
    "TaskStream",
    "TrainConfig",
    "WeightingConfig",
    "__version__",
    "demographic_parity_disparity",
    "equalized_odds_disparity",
    "error_rate_disparity",
    "init_mlp",
    "solve_lp",
    "solve_weights",
    "train_stream",
]
