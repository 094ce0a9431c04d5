"""Experiment orchestration: INI configs, runs, deterministic CSV outputs.

A run trains every (method, seed) pair on the same per-seed stream and
writes two CSVs whose bytes depend only on the config: ``results.csv``
holds per-task rows in long form and ``summary.csv`` holds per-method
aggregates over seeds. Wall-clock and environment notes go to
``manifest.txt``, which is allowed to differ between runs.
"""

from __future__ import annotations

import configparser
import csv
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import data as datamod
from . import lp
from .training import METHODS, RunHistory, TrainConfig, train_stream
from .weighting import MEASURES, ConfigError, WeightingConfig

logger = logging.getLogger(__name__)

DATASETS = ("toy", "toy_grouped", "color", "csv", "idx")

# Hyperparameter grid the sweep walks by default.
SWEEP_ALPHAS = (0.0005, 0.001, 0.002, 0.01)
SWEEP_LAMBDAS = (0.1, 0.5, 1.0)
SWEEP_TAUS = (1.0, 2.0, 5.0, 10.0)
SWEEP_LRS = (0.001, 0.01, 0.1)


@dataclass
class DataConfig:
    n_per_class: int = 500
    n_test_per_class: int = 500
    n_classes: int = 10
    n_features: int = 8
    bias_train: float = 0.95
    bias_test: float = 0.5
    data_seed: int = -1  # -1: follow the run seed
    train_path: str = ""
    test_path: str = ""
    train_images: str = ""
    train_labels: str = ""
    test_images: str = ""
    test_labels: str = ""
    has_group: bool = False


@dataclass
class ExperimentConfig:
    dataset: str = "toy"
    n_tasks: int = 2
    methods: tuple[str, ...] = METHODS
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    data: DataConfig = field(default_factory=DataConfig)
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if self.dataset not in DATASETS:
            raise ConfigError(f"unknown dataset {self.dataset!r}")
        for m in self.methods:
            if m not in METHODS:
                raise ConfigError(f"unknown method {m!r}")
        if not self.seeds:
            raise ConfigError("need at least one seed")


def _parse_section(parser, name, target, casts) -> dict:
    out = {}
    if not parser.has_section(name):
        return out
    for key, raw in parser.items(name):
        if key not in casts:
            raise ConfigError(f"unknown key {key!r} in section [{name}]")
        try:
            out[key] = casts[key](raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {name}.{key}: {raw!r}") from exc
    return out


def _bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(raw)


def _int_list(raw: str) -> tuple[int, ...]:
    return tuple(int(p) for p in raw.replace(",", " ").split())


def _str_list(raw: str) -> tuple[str, ...]:
    return tuple(p for p in raw.replace(",", " ").split())


def _float_list(raw: str) -> tuple[float, ...]:
    return tuple(float(p) for p in raw.replace(",", " ").split())


def load_config(path) -> ExperimentConfig:
    """Parse an INI experiment config; unknown sections or keys are errors."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config {path}")
    known = {"experiment", "data", "train", "weighting", "sweep"}
    extra = set(parser.sections()) - known
    if extra:
        raise ConfigError(f"unknown config sections: {sorted(extra)}")

    exp_kw = _parse_section(
        parser,
        "experiment",
        None,
        {
            "dataset": str,
            "n_tasks": int,
            "methods": _str_list,
            "seeds": _int_list,
        },
    )
    data_kw = _parse_section(
        parser,
        "data",
        None,
        {
            "n_per_class": int,
            "n_test_per_class": int,
            "n_classes": int,
            "n_features": int,
            "bias_train": float,
            "bias_test": float,
            "data_seed": int,
            "train_path": str,
            "test_path": str,
            "train_images": str,
            "train_labels": str,
            "test_images": str,
            "test_labels": str,
            "has_group": _bool,
        },
    )
    train_kw = _parse_section(
        parser,
        "train",
        None,
        {
            "epochs": int,
            "batch_size": int,
            "lr": float,
            "momentum": float,
            "tau": float,
            "hidden": int,
            "buffer_per_group": int,
            "buffer_group_by": str,
            "replay_full_buffer": _bool,
            "weight_first_task": _bool,
        },
    )
    weight_kw = _parse_section(
        parser,
        "weighting",
        None,
        {"measure": str, "alpha": float, "lam": float, "grad_norm": str, "backend": str},
    )
    return ExperimentConfig(
        data=DataConfig(**data_kw),
        train=TrainConfig(weighting=WeightingConfig(**weight_kw), **train_kw),
        **exp_kw,
    )


def load_sweep_grid(path) -> dict:
    parser = configparser.ConfigParser()
    parser.read(path)
    grid = _parse_section(
        parser,
        "sweep",
        None,
        {
            "alphas": _float_list,
            "lambdas": _float_list,
            "taus": _float_list,
            "lrs": _float_list,
        },
    )
    return {
        "alphas": grid.get("alphas", SWEEP_ALPHAS),
        "lambdas": grid.get("lambdas", SWEEP_LAMBDAS),
        "taus": grid.get("taus", SWEEP_TAUS),
        "lrs": grid.get("lrs", SWEEP_LRS),
    }


def build_stream(cfg: ExperimentConfig, seed: int) -> datamod.TaskStream:
    """Materialise the configured dataset and split it into tasks."""
    d = cfg.data
    data_seed = seed if d.data_seed < 0 else d.data_seed
    if cfg.dataset in ("toy", "toy_grouped"):
        if cfg.n_tasks != 2:
            raise ConfigError("the toy stream is defined with exactly 2 tasks")
        return datamod.gen_toy_gaussians(
            d.n_per_class,
            d.n_test_per_class,
            seed=data_seed,
            grouped=cfg.dataset == "toy_grouped",
        )
    if cfg.dataset == "color":
        return datamod.gen_color_biased(
            d.n_per_class,
            d.n_classes,
            d.n_features,
            d.bias_train,
            d.bias_test,
            seed=data_seed,
            n_test_per_class=d.n_test_per_class,
            n_tasks=cfg.n_tasks,
        )
    if cfg.dataset == "csv":
        if not d.train_path or not d.test_path:
            raise ConfigError("csv dataset needs train_path and test_path")
        train = datamod.load_csv(d.train_path, has_group=d.has_group)
        test = datamod.load_csv(d.test_path, has_group=d.has_group)
    else:  # idx
        paths = (d.train_images, d.train_labels, d.test_images, d.test_labels)
        if not all(paths):
            raise ConfigError("idx dataset needs all four image/label paths")
        train = datamod.load_idx_pair(d.train_images, d.train_labels)
        test = datamod.load_idx_pair(d.test_images, d.test_labels)
    return datamod.split_tasks(train, test, cfg.n_tasks)


def run_experiment(
    cfg: ExperimentConfig, out_dir=None
) -> dict[tuple[str, int], RunHistory]:
    """Train every (method, seed) pair; optionally write the CSV outputs."""
    t0 = time.monotonic()
    histories: dict[tuple[str, int], RunHistory] = {}
    for seed in cfg.seeds:
        stream = build_stream(cfg, seed)
        for method in cfg.methods:
            logger.info("running method=%s seed=%d", method, seed)
            _, hist = train_stream(stream, cfg.train, method, seed)
            histories[(method, seed)] = hist
        if out_dir is not None:
            # Flush after every seed so partial results survive interruption.
            write_outputs(cfg, histories, out_dir, elapsed=time.monotonic() - t0)
    return histories


def _result_rows(histories) -> list[tuple]:
    rows = []
    for (method, seed), hist in histories.items():
        for task in hist.tasks:
            for t, acc in enumerate(task.accuracies):
                rows.append((method, seed, task.task, f"acc_{t}", acc))
            rows.append((method, seed, task.task, "avg_acc", task.avg_accuracy))
            for measure, value in sorted(task.disparities.items()):
                rows.append((method, seed, task.task, measure, value))
    rows.sort(key=lambda r: (r[0], r[1], r[2], r[3]))
    return rows


def _summary_rows(histories) -> list[tuple]:
    by_method: dict[str, list[RunHistory]] = {}
    for (method, _), hist in histories.items():
        by_method.setdefault(method, []).append(hist)
    rows = []
    for method in sorted(by_method):
        hists = by_method[method]
        final_acc = [h.final_avg_accuracy for h in hists]
        rows.append(
            (method, "final_avg_acc", float(np.mean(final_acc)), float(np.std(final_acc)))
        )
        for measure in sorted(hists[0].tasks[0].disparities):
            vals = [h.mean_disparity(measure) for h in hists]
            rows.append(
                (method, f"avg_{measure}", float(np.mean(vals)), float(np.std(vals)))
            )
    return rows


def _weight_rows(histories) -> list[tuple]:
    rows = []
    for (method, seed), hist in histories.items():
        for task in hist.tasks:
            for rec in task.epochs:
                if rec.weight_bins is None:
                    continue
                for y, bins in sorted(rec.weight_bins.items()):
                    for b, count in enumerate(bins):
                        rows.append((method, seed, task.task, rec.epoch, y, b, count))
    rows.sort()
    return rows


def write_outputs(cfg, histories, out_dir, elapsed: float = 0.0) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "results.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "seed", "task", "metric", "value"])
        for method, seed, task, metric, value in _result_rows(histories):
            w.writerow([method, seed, task, metric, f"{value:.6f}"])
    with open(out / "summary.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "metric", "mean", "std"])
        for method, metric, mean, std in _summary_rows(histories):
            w.writerow([method, metric, f"{mean:.6f}", f"{std:.6f}"])
    weight_rows = _weight_rows(histories)
    if weight_rows:
        # Bin 0 is exactly-zero weights, bins 1-10 the interior tenths,
        # bin 11 exactly-one.
        with open(out / "weights.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["method", "seed", "task", "epoch", "class", "bin", "count"])
            w.writerows(weight_rows)
    wcfg = cfg.train.weighting
    lines = [
        f"dataset={cfg.dataset}",
        f"n_tasks={cfg.n_tasks}",
        f"methods={','.join(cfg.methods)}",
        f"seeds={','.join(str(s) for s in cfg.seeds)}",
        f"measure={wcfg.measure}",
        f"alpha={wcfg.alpha}",
        f"lambda={wcfg.lam}",
        f"tau={cfg.train.tau}",
        f"lr={cfg.train.lr}",
        f"epochs={cfg.train.epochs}",
        f"batch_size={cfg.train.batch_size}",
        f"hidden={cfg.train.hidden}",
        f"buffer_per_group={cfg.train.buffer_per_group}",
        f"lp_backend={lp.default_backend()}",
        f"elapsed_seconds={elapsed:.1f}",
    ]
    (out / "manifest.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


# -- Hyperparameter sweep ------------------------------------------------

def _sweep_point(args) -> tuple:
    cfg, alpha, lam, tau, lr = args
    wcfg = replace(cfg.train.weighting, alpha=alpha, lam=lam)
    tcfg = replace(cfg.train, tau=tau, lr=lr, weighting=wcfg)
    point_cfg = replace(cfg, methods=("weighted_replay",), train=tcfg)
    hists = run_experiment(point_cfg)
    accs = [h.final_avg_accuracy for h in hists.values()]
    disps = [h.mean_disparity(cfg.train.weighting.measure) for h in hists.values()]
    return alpha, lam, tau, lr, float(np.mean(accs)), float(np.mean(disps))


def pareto_flags(points: list[tuple[float, float]]) -> list[bool]:
    """True where no other point has strictly higher accuracy and strictly
    lower disparity."""
    flags = []
    for i, (acc, disp) in enumerate(points):
        dominated = any(
            j != i and points[j][0] > acc and points[j][1] < disp
            for j in range(len(points))
        )
        flags.append(not dominated)
    return flags


def run_sweep(cfg: ExperimentConfig, grid: dict, out_dir, workers: int = 1) -> list[tuple]:
    """Walk the (alpha, lambda, tau, lr) grid and mark the Pareto frontier."""
    jobs = [
        (cfg, a, l, t, r)
        for a in grid["alphas"]
        for l in grid["lambdas"]
        for t in grid["taus"]
        for r in grid["lrs"]
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_point, jobs))
    else:
        results = [_sweep_point(j) for j in jobs]
    results.sort(key=lambda r: r[:4])
    flags = pareto_flags([(r[4], r[5]) for r in results])
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sweep.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["alpha", "lambda", "tau", "lr", "accuracy", "disparity", "pareto"])
        for row, flag in zip(results, flags):
            a, l, t, r, acc, disp = row
            w.writerow([a, l, t, r, f"{acc:.6f}", f"{disp:.6f}", int(flag)])
    return [row + (flag,) for row, flag in zip(results, flags)]
