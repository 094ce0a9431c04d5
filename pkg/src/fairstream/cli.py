"""Command-line harness: run experiments, sweep, generate data, self-check."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import data as datamod
from . import experiment, lp, metrics, nn, oracles
from .weighting import MEASURES, ConfigError

logger = logging.getLogger(__name__)


def _cmd_run(args) -> int:
    if args.config:
        cfg = experiment.load_config(args.config)
    else:
        cfg = experiment.ExperimentConfig()
    if args.seed is not None:
        cfg = replace(cfg, seeds=(args.seed,))
    if args.method:
        cfg = replace(cfg, methods=tuple(args.method))
    if args.measure:
        wcfg = replace(cfg.train.weighting, measure=args.measure)
        cfg = replace(cfg, train=replace(cfg.train, weighting=wcfg))
    if args.backend:
        wcfg = replace(cfg.train.weighting, backend=args.backend)
        cfg = replace(cfg, train=replace(cfg.train, weighting=wcfg))
    histories = experiment.run_experiment(cfg, out_dir=args.out)
    for (method, seed), hist in sorted(histories.items()):
        disp = " ".join(
            f"{m}={hist.mean_disparity(m):.4f}"
            for m in sorted(hist.tasks[0].disparities)
        )
        print(
            f"{method} seed={seed}: avg_acc={hist.final_avg_accuracy:.4f} {disp}"
        )
    if args.out:
        print(f"wrote results.csv, summary.csv, weights.csv, manifest.txt to {args.out}")
    return 0


def _cmd_sweep(args) -> int:
    cfg = experiment.load_config(args.config) if args.config else experiment.ExperimentConfig()
    grid = experiment.load_sweep_grid(args.config) if args.config else {
        "alphas": experiment.SWEEP_ALPHAS,
        "lambdas": experiment.SWEEP_LAMBDAS,
        "taus": experiment.SWEEP_TAUS,
        "lrs": experiment.SWEEP_LRS,
    }
    rows = experiment.run_sweep(cfg, grid, args.out, workers=args.workers)
    n_pareto = sum(1 for r in rows if r[-1])
    print(f"swept {len(rows)} points, {n_pareto} on the Pareto front -> {args.out}/sweep.csv")
    return 0


def _cmd_gen_data(args) -> int:
    if args.dataset in ("toy", "toy_grouped"):
        stream = datamod.gen_toy_gaussians(
            args.n_per_class,
            args.n_test_per_class,
            seed=args.seed,
            grouped=args.dataset == "toy_grouped",
        )
    elif args.dataset == "color":
        stream = datamod.gen_color_biased(
            args.n_per_class,
            args.n_classes,
            args.n_features,
            args.bias_train,
            args.bias_test,
            seed=args.seed,
            n_test_per_class=args.n_test_per_class,
        )
    else:
        raise ConfigError(f"cannot generate dataset {args.dataset!r}")
    train, test = datamod.stream_to_data(stream)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    datamod.save_csv(out / "train.csv", train)
    datamod.save_csv(out / "test.csv", test)
    print(f"wrote {len(train)} train / {len(test)} test rows to {out}")
    return 0


def _check_transform(rng) -> str:
    for _ in range(5):
        obj = lp.AbsObjective(3)
        for _ in range(rng.integers(1, 4)):
            obj.add_abs(rng.uniform(0.2, 1.0), rng.normal(), rng.normal(size=3))
        obj.add_linear(rng.uniform(0.1, 0.5), rng.normal(), rng.normal(size=3))
        w, sol = lp.solve_abs_objective(obj)
        grid_val, _ = oracles.grid_min(obj, step=0.02)
        bound = obj.lipschitz_bound() * 0.02 * np.sqrt(3)
        if sol.objective > grid_val + 1e-9:
            return f"LP above grid minimum ({sol.objective} > {grid_val})"
        if grid_val - sol.objective > bound:
            return f"gap {grid_val - sol.objective} exceeds bound {bound}"
        k = len(obj.abs_terms)
        y_pos, y_neg = sol.x[3 : 3 + k], sol.x[3 + k :]
        if np.minimum(y_pos, y_neg).max() > 1e-8:
            return "complementarity violated"
    return ""


def _check_gradients(rng) -> str:
    for _ in range(3):
        model = nn.init_mlp(4, 5, 3, rng)
        x = rng.normal(size=(6, 4))
        y = rng.integers(0, 3, size=6)
        got = nn.last_layer_grad(model, x, y)
        want = oracles.finite_diff_last_layer_grad(model, x, y)
        rel = np.linalg.norm(got - want) / max(np.linalg.norm(want), 1e-12)
        if rel > 1e-4:
            return f"gradient mismatch (rel err {rel:.2e})"
    return ""


def _check_metrics() -> str:
    y = np.array([0] * 10 + [1] * 10)
    pred = y.copy()
    pred[:1] = 1  # class 0 err 0.1
    pred[10:13] = 0  # class 1 err 0.3
    if abs(metrics.error_rate_disparity(y, pred) - 0.1) > 1e-12:
        return "error-rate disparity example failed"
    a_l, a_bar = metrics.task_averaged_accuracy([[0.9], [0.5, 0.8]])
    if abs(a_l[1] - 0.65) > 1e-12 or abs(a_bar - 0.775) > 1e-12:
        return "average accuracy example failed"
    return ""


def _check_momentum() -> str:
    p, v = np.array([1.0]), np.array([0.0])
    g = np.array([1.0])
    p, v = nn.momentum_step(p, g, v, lr=0.1, momentum=0.9)
    p, v = nn.momentum_step(p, g, v, lr=0.1, momentum=0.9)
    if abs(p[0] - 0.71) > 1e-12:
        return f"momentum example failed (got {p[0]})"
    return ""


def _check_backends(rng) -> str:
    if "compiled" not in lp.available_backends():
        return ""  # nothing to compare
    for _ in range(5):
        obj = lp.AbsObjective(4)
        for _ in range(3):
            obj.add_abs(rng.uniform(0.2, 1.0), rng.normal(), rng.normal(size=4))
        problem = lp.build_abs_lp(obj)
        a = lp.solve_lp(problem, backend="compiled")
        b = lp.solve_lp(problem, backend="python")
        if a.status != b.status or abs(a.objective - b.objective) > 1e-9:
            return f"backends disagree ({a.objective} vs {b.objective})"
    return ""


def _cmd_verify(_args) -> int:
    rng = np.random.default_rng(20240817)
    checks = [
        ("abs-transform soundness", lambda: _check_transform(rng)),
        ("last-layer gradient vs finite diff", lambda: _check_gradients(rng)),
        ("metric hand examples", _check_metrics),
        ("momentum update example", _check_momentum),
        ("solver backend agreement", lambda: _check_backends(rng)),
    ]
    failed = 0
    for name, fn in checks:
        detail = fn()
        if detail:
            failed += 1
            print(f"FAIL {name}: {detail}")
        else:
            print(f"PASS {name}")
    print(f"lp backend: {lp.default_backend()}")
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fairstream",
        description="Fairness-aware sample weighting for class-incremental learning",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="train the configured methods and report metrics")
    run.add_argument("--config", help="INI experiment config")
    run.add_argument("--seed", type=int, help="override: single seed")
    run.add_argument(
        "--method",
        action="append",
        choices=("weighted_replay", "uniform_replay", "finetune", "joint"),
        help="override: method (repeatable)",
    )
    run.add_argument("--measure", choices=MEASURES, help="override: fairness measure")
    run.add_argument("--backend", choices=("compiled", "python"), help="LP backend")
    run.add_argument("--out", help="directory for results.csv/summary.csv/manifest.txt")
    run.set_defaults(fn=_cmd_run)

    sweep = sub.add_parser("sweep", help="hyperparameter grid sweep with Pareto flags")
    sweep.add_argument("--config", help="INI experiment config (plus optional [sweep])")
    sweep.add_argument("--out", required=True)
    sweep.add_argument("--workers", type=int, default=1)
    sweep.set_defaults(fn=_cmd_sweep)

    gen = sub.add_parser("gen-data", help="write a synthetic dataset as CSV")
    gen.add_argument("--dataset", choices=("toy", "toy_grouped", "color"), default="toy")
    gen.add_argument("--out", required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--n-per-class", type=int, default=500)
    gen.add_argument("--n-test-per-class", type=int, default=500)
    gen.add_argument("--n-classes", type=int, default=10)
    gen.add_argument("--n-features", type=int, default=8)
    gen.add_argument("--bias-train", type=float, default=0.95)
    gen.add_argument("--bias-test", type=float, default=0.5)
    gen.set_defaults(fn=_cmd_gen_data)

    ver = sub.add_parser("verify", help="fast self-checks; exit 0 when all pass")
    ver.set_defaults(fn=_cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.fn(args)
    except (ConfigError, datamod.ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
