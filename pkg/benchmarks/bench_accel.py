"""Time the numba and pure-numpy paths of the kernel sweep and the upwind stepper.

    python3 benchmarks/bench_accel.py [--grid 100 200] [--repeat 3]
"""
import argparse
import dataclasses
import time

import numpy as np

from hyperjump import _accel
from hyperjump.config import scenario_paper_v
from hyperjump.kernel import solve_kernels
from hyperjump.markov import sample_path
from hyperjump.pde import simulate


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--grid", type=int, nargs="+", default=[100, 200])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if not _accel.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    cfg0, spec, nom = scenario_paper_v()
    print(f"{'task':<22}{'N':>6}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}{'max diff':>12}")
    for n in args.grid:
        solve_kernels(nom, 16, use_numba=True)  # compile
        tn, kn = best_of(lambda: solve_kernels(nom, n, use_numba=True), args.repeat)
        tp, kp = best_of(lambda: solve_kernels(nom, n, use_numba=False), 1)
        diff = max(np.abs(kn.k - kp.k).max(), np.abs(kn.n - kp.n).max())
        print(f"{'kernel solve':<22}{n:>6}{tn:>12.3f}{tp:>12.3f}{tp / tn:>10.1f}{diff:>12.1e}")

        cfg = dataclasses.replace(cfg0, grid=dataclasses.replace(cfg0.grid, n_cells=n))
        path = sample_path(spec, cfg.horizon, 0)
        run = lambda use: simulate(cfg, path, nom, kn, modes=spec.modes, use_numba=use)  # noqa: E731
        run(True)
        tn, a = best_of(lambda: run(True), args.repeat)
        tp, b = best_of(lambda: run(False), 1)
        diff = np.abs(a.p_series - b.p_series).max()
        print(f"{'closed-loop run':<22}{n:>6}{tn:>12.3f}{tp:>12.3f}{tp / tn:>10.1f}{diff:>12.1e}")


if __name__ == "__main__":
    main()
