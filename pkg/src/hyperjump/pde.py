"""First-order upwind simulation of the switching 3+1 hyperbolic closed loop."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import _accel
from .io import fmt, write_table
from .kernel import KernelSolution
from .lyapunov import LyapunovParams, lyapunov_weights
from .markov import ModePath
from .model import Grid, Mode, ModelError
from .transform import control_weights, trapezoid_weights, volterra_matrices

CONTROLLERS = ("nominal_backstepping", "zero_input")


class SimulationDiverged(RuntimeError):
    def __init__(self, t: float):
        super().__init__(f"simulation diverged at t = {t:.6g}")
        self.t = t


def initial_field(spec, x: np.ndarray) -> np.ndarray:
    """Resolve an initial-condition preset name or array to a (4, N+1) field."""
    if isinstance(spec, str):
        if spec == "sinusoidal":
            return np.tile(np.sin(2 * np.pi * x), (4, 1))
        if spec == "zero":
            return np.zeros((4, x.size))
        raise ModelError(f"unknown initial condition preset {spec!r}")
    w = np.array(spec, dtype=float)
    if w.shape != (4, x.size):
        raise ModelError(f"initial condition must have shape (4, {x.size})")
    return w


@dataclass
class SimConfig:
    grid: Grid
    horizon: float
    initial_condition: object = "sinusoidal"
    controller: str = "nominal_backstepping"
    snapshot_stride: int = 0  # 0 picks roughly 50 snapshots

    def __post_init__(self):
        if self.controller not in CONTROLLERS:
            raise ModelError(f"controller must be one of {CONTROLLERS}")
        if not self.horizon > 0:
            raise ModelError("horizon must be positive")
        w0 = initial_field(self.initial_condition, self.grid.x)
        if not np.all(np.isfinite(w0)):
            raise ModelError("initial condition has non-finite entries")

    @property
    def n_steps(self) -> int:
        return max(1, math.ceil(self.horizon / self.grid.dt - 1e-9))

    @property
    def dt(self) -> float:
        # the CFL step shortened so that the last stamp lands on the horizon
        return self.horizon / self.n_steps

    @property
    def stride(self) -> int:
        return self.snapshot_stride or max(1, self.n_steps // 50)


@dataclass
class Trajectory:
    t_grid: np.ndarray
    p_series: np.ndarray
    u_series: np.ndarray
    mode_series: np.ndarray
    snapshot_times: np.ndarray
    snapshots: np.ndarray
    v_series: np.ndarray | None = None
    beta1_series: np.ndarray | None = None
    theta_max_series: np.ndarray | None = None
    x: np.ndarray = field(default=None, repr=False)

    def write(self, out_dir, snapshots: bool = True):
        out = Path(out_dir)
        v = self.v_series if self.v_series is not None else np.full_like(self.p_series, np.nan)
        write_table(out / "series.csv", ["t", "p", "v", "u", "mode"],
                    [self.t_grid, self.p_series, v, self.u_series, self.mode_series])
        if snapshots:
            for t, w in zip(self.snapshot_times, self.snapshots):
                write_table(out / f"snapshot_{fmt(t)}.csv", ["x", "w1", "w2", "w3", "w4"],
                            [self.x, w[0], w[1], w[2], w[3]])


def _mode_tables(modes: Sequence[Mode], x: np.ndarray):
    lam = np.array([m.lambda_plus for m in modes])
    mu = np.array([m.mu_minus for m in modes])
    spp, spm, smp = zip(*(m.sigmas(x) for m in modes))
    q = np.array([m.q_bound for m in modes])
    r = np.array([m.r_bound for m in modes])
    return lam, mu, np.array(spp), np.array(spm), np.array(smp), q, r


def simulate(cfg: SimConfig, path: ModePath, nominal: Mode, ks: KernelSolution | None,
             modes: Sequence[Mode] | None = None, lyap: LyapunovParams | None = None,
             use_numba=None) -> Trajectory:
    """Run the closed (or open) loop along ``path``.

    ``path`` indexes into ``modes``; with ``modes=None`` the plant is frozen
    at ``nominal`` and ``path`` must only visit index 0.  When ``lyap`` is
    given, V(t) and the target boundary value beta(1, t) are recorded.
    """
    grid = cfg.grid
    x = grid.x
    modes = [nominal] if modes is None else list(modes)
    used = np.unique(path.modes)
    if used.min() < 0 or used.max() >= len(modes):
        raise ModelError("mode path refers to unknown modes")
    for j in used:
        if not grid.admits(modes[j].max_speed):
            raise ModelError(f"CFL condition violated by mode {j}")
    control = cfg.controller == "nominal_backstepping"
    if ks is None:
        if control or lyap is not None:
            raise ModelError("kernels required for the backstepping controller and V(t)")
        ks = KernelSolution.zeros(grid.n_cells)
    ks.check_grid(grid.n_cells)

    nsteps = cfg.n_steps
    dt = cfg.dt
    mode_idx = path.on_steps(dt, nsteps).astype(np.int64)
    lam, mu, spp, spm, smp, q, r = _mode_tables(modes, x)
    kw, nw = control_weights(ks)
    want_v = lyap is not None
    if want_v:
        bk, bn = volterra_matrices(ks)
        wts = trapezoid_weights(grid.n_cells)
        dw = np.array([lyapunov_weights(m, lyap, x) * wts for m in modes])
    else:
        bk, bn, dw = np.zeros((3, 1, 1)), np.zeros((1, 1)), np.zeros((len(modes), 4, 1))
    w0 = initial_field(cfg.initial_condition, x)
    stride = cfg.stride
    p, u, v, b1, tmax, snaps, div = _accel.run_upwind(
        np.ascontiguousarray(w0), mode_idx, lam, mu, spp, spm, smp, q, r,
        np.ascontiguousarray(kw), np.ascontiguousarray(nw), nominal.r_bound.copy(), control, dt,
        grid.h, stride, want_v, np.ascontiguousarray(bk), np.ascontiguousarray(bn),
        np.ascontiguousarray(dw), use_numba=use_numba)
    if div >= 0:
        raise SimulationDiverged(div * dt)
    t = np.arange(nsteps + 1) * dt
    return Trajectory(
        t_grid=t, p_series=p, u_series=u, mode_series=mode_idx,
        snapshot_times=t[::stride], snapshots=snaps, x=x,
        v_series=v if want_v else None,
        beta1_series=b1 if want_v else None,
        theta_max_series=tmax if want_v else None,
    )
