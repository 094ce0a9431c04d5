"""Benchmark the compiled simplex kernel against the pure-python fallback.

Generates random weighting problems (absolute-value objectives over box
variables, reformulated as equality-form LPs), solves each with both
backends, checks that the objectives agree, and reports wall times.

Usage:
    python3 benchmarks/bench_simplex.py
    python3 benchmarks/bench_simplex.py --sizes 50,8 200,16 800,32 --repeats 5
"""

import argparse
import time

import numpy as np

from fairstream.lp import AbsObjective, available_backends, build_abs_lp, solve_lp


def make_problem(n_weights: int, n_abs: int, rng: np.random.Generator):
    obj = AbsObjective(n_weights)
    for _ in range(n_abs):
        obj.add_abs(
            float(rng.uniform(0.1, 2.0)),
            float(rng.normal()),
            rng.normal(size=n_weights) / np.sqrt(n_weights),
        )
    obj.add_linear(
        float(rng.uniform(0.1, 1.0)),
        float(rng.normal()),
        rng.normal(size=n_weights) / np.sqrt(n_weights),
    )
    return build_abs_lp(obj)


def time_backend(problems, backend: str) -> tuple[float, list[float]]:
    objectives = []
    t0 = time.perf_counter()
    for problem in problems:
        sol = solve_lp(problem, backend=backend)
        if sol.status != "optimal":
            raise RuntimeError(f"{backend} backend returned {sol.status}")
        objectives.append(sol.objective)
    return time.perf_counter() - t0, objectives


def parse_size(text: str) -> tuple[int, int]:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("sizes look like N_WEIGHTS,N_ABS")
    return int(parts[0]), int(parts[1])


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--sizes",
        type=parse_size,
        nargs="+",
        default=[(50, 6), (200, 12), (500, 24), (1000, 24)],
        metavar="N_WEIGHTS,N_ABS",
        help="problem sizes to benchmark (default: %(default)s)",
    )
    parser.add_argument("--repeats", type=int, default=5, help="problems per size")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    backends = available_backends()
    print(f"backends: {', '.join(backends)}")
    if "compiled" not in backends:
        print("compiled backend unavailable; timing python only")
    header = f"{'n_weights':>10} {'n_abs':>6} {'lp_vars':>8}"
    for backend in backends:
        header += f" {backend + ' (s)':>14}"
    if len(backends) == 2:
        header += f" {'speedup':>9}"
    print(header)

    rng = np.random.default_rng(args.seed)
    for n_weights, n_abs in args.sizes:
        problems = [make_problem(n_weights, n_abs, rng) for _ in range(args.repeats)]
        times = {}
        results = {}
        for backend in backends:
            times[backend], results[backend] = time_backend(problems, backend)
        if len(backends) == 2:
            gap = max(
                abs(a - b) / (1.0 + abs(b))
                for a, b in zip(results[backends[0]], results[backends[1]])
            )
            if gap > 1e-9:
                raise RuntimeError(f"backend objectives diverge: rel gap {gap:.2e}")
        row = f"{n_weights:>10d} {n_abs:>6d} {n_weights + 2 * n_abs:>8d}"
        for backend in backends:
            row += f" {times[backend]:>14.4f}"
        if len(backends) == 2:
            row += f" {times['python'] / times['compiled']:>8.1f}x"
        print(row)


if __name__ == "__main__":
    main()
