"""Monte-Carlo ensembles of switching closed-loop runs."""
from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .io import read_table, write_table
from .kernel import KernelSolution
from .lyapunov import FitError, decay_fit
from .markov import sample_path
from .model import MarkovSpec, Mode, ModelError
from .pde import SimConfig, SimulationDiverged, simulate

log = logging.getLogger(__name__)

WORKERS_ENV = "HYPERJUMP_WORKERS"


class EnsembleError(RuntimeError):
    pass


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return min(4, os.cpu_count() or 1)


@dataclass
class EnsembleResult:
    t_grid: np.ndarray
    mean_p: np.ndarray
    ci_halfwidth: np.ndarray
    n_paths: int
    fitted: tuple
    diverged: tuple = ()

    def to_csv(self, path):
        write_table(path, ["t", "mean_p", "ci"], [self.t_grid, self.mean_p, self.ci_halfwidth])


def _path_file(out_dir, seed: int) -> Path:
    return Path(out_dir) / "paths" / f"{seed}.csv"


def _one(cfg, spec, nominal, ks, seed, out_dir):
    if out_dir is not None:
        f = _path_file(out_dir, seed)
        if f.exists():
            header, data = read_table(f)
            if header == ["t", "p", "mode"] and len(data) == cfg.n_steps + 1:
                return data[:, 1]
    path = sample_path(spec, cfg.horizon, seed)
    try:
        traj = simulate(cfg, path, nominal, ks, modes=spec.modes)
    except SimulationDiverged as exc:
        log.warning("path %d diverged at t=%g", seed, exc.t)
        return None
    if out_dir is not None:
        write_table(_path_file(out_dir, seed), ["t", "p", "mode"],
                    [traj.t_grid, traj.p_series, traj.mode_series])
    return traj.p_series


def run_ensemble(cfg: SimConfig, spec: MarkovSpec, nominal: Mode, ks: KernelSolution | None,
                 n_paths: int, base_seed: int = 0, *, workers: int | None = None,
                 out_dir=None, tail_fraction: float = 1.0) -> EnsembleResult:
    """Simulate ``n_paths`` sampled mode paths and average p(t) pointwise.

    Path k uses seed ``base_seed + k``.  With ``out_dir`` each path is written
    to ``paths/<seed>.csv`` as it finishes and reused on a rerun.
    """
    if n_paths < 2:
        raise ModelError("n_paths must be at least 2")
    seeds = list(range(base_seed, base_seed + n_paths))
    workers = default_workers() if workers is None else max(1, int(workers))
    args = [(cfg, spec, nominal, ks, s, out_dir) for s in seeds]
    if workers == 1:
        results = [_one(*a) for a in args]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda a: _one(*a), args))
    failed = tuple(s for s, r in zip(seeds, results) if r is None)
    if len(failed) > 0.01 * n_paths:
        raise EnsembleError(f"{len(failed)} of {n_paths} paths diverged (seeds {failed[:10]})")
    ps = np.array([r for r in results if r is not None])
    n = len(ps)
    mean = ps.mean(axis=0)
    ci = 1.96 * ps.std(axis=0, ddof=1) / np.sqrt(n)
    t = np.arange(cfg.n_steps + 1) * cfg.dt
    try:
        fitted = decay_fit(t, mean, tail_fraction)
    except FitError:
        fitted = (float("nan"), float("nan"))
    res = EnsembleResult(t, mean, ci, n, fitted, failed)
    if out_dir is not None:
        res.to_csv(Path(out_dir) / "ensemble.csv")
    return res
