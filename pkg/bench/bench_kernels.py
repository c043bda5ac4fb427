"""Numba kernels against their numpy fallbacks, per kernel and end to end.

    python3 bench/bench_kernels.py [--cells 800] [--repeat 5]
"""
import argparse
import math
import time
import timeit

import numpy as np

from shockcert import _kernels as K
from shockcert.pipeline import RunSettings, Simulation

COEF = np.array([0.0, 0.0, 0.5])
DCOEF = np.array([0.0, 1.0])
INF = math.inf
EXP1 = [
    (-INF, 0.25, "const", [3.0]),
    (0.25, 0.5, "affine", [1.0, 2.0]),
    (0.5, 0.625, "affine", [0.0, 1.0]),
    (0.625, INF, "const", [0.0]),
]


def kernel_cases(n):
    rng = np.random.default_rng(0)
    u = rng.uniform(-2, 2, n)
    uo = np.sort(rng.uniform(-1, 2, n))
    un = uo + 1e-3 * rng.standard_normal(n)
    h, dt = 1.0 / n, 0.4 / n
    buf = np.zeros((n, 4))
    ro = 2.0 * (-2.0 + (np.arange(n) + 0.5) * h)
    rn = np.sort(ro + 1e-4 * rng.standard_normal(n))
    line = (ro, rn, -2.0, -1.0, n // 10, n - n // 10, 0.5, 0.1, 0.4, -0.5, 1.5, DCOEF, h, dt)
    return {
        "fv_step": (lambda: K.fv_step_np(u, COEF, 0.0, 0.4), lambda: K.fv_step_nb(u, COEF, 0.0, 0.4)),
        "r2_grid_sum": (
            lambda: K.r2_grid_sum_np(uo, un, DCOEF, h, dt),
            lambda: K.r2_grid_sum_nb(uo, un, DCOEF, h, dt, K.GAUSS),
        ),
        "r2_grid_max": (
            lambda: K.r2_grid_max_np(buf, uo, un, 0, 1, n - 1, DCOEF, h, dt),
            lambda: K.r2_grid_max_nb(buf, uo, un, 0, 1, n - 1, DCOEF, h, dt, K.GAUSS),
        ),
        "r2_line_max": (lambda: K.r2_line_max_np(buf, *line), lambda: K.r2_line_max_nb(buf, *line, K.GAUSS)),
        "min_gap": (lambda: K.min_gap_np(uo, 0, un, 0, 0, n), lambda: K.min_gap_nb(uo, 0, un, 0, 0, n)),
    }


def best(fn, repeat, number):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def pipeline_time(cells, use_numba):
    K.USE_NUMBA = use_numba
    t0 = time.perf_counter()
    Simulation(EXP1, RunSettings(cells, 0.3)).run()
    return time.perf_counter() - t0


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cells", type=int, default=800)
    ap.add_argument("--size", type=int, default=4000, help="array length for the kernel timings")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not K.HAS_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")

    print(f"{'kernel':<14}{'numpy':>12}{'numba':>12}{'speedup':>10}")
    for name, (f_np, f_nb) in kernel_cases(args.size).items():
        f_nb()  # compile outside the timing
        a = best(f_np, args.repeat, 20)
        b = best(f_nb, args.repeat, 20)
        print(f"{name:<14}{a * 1e6:>10.1f}us{b * 1e6:>10.1f}us{a / b:>9.1f}x")

    pipeline_time(100, True)  # warm the jit caches
    a = pipeline_time(args.cells, False)
    b = pipeline_time(args.cells, True)
    print(f"\nexp1 at {args.cells} cells: numpy {a:.2f} s, numba {b:.2f} s, speedup {a / b:.1f}x")


if __name__ == "__main__":
    main()
