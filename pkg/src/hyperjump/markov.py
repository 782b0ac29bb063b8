"""Jump-parameter engine: Kolmogorov forward probabilities and sample paths."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .io import write_table
from .model import MarkovSpec, Mode, ModelError, mode_distance


@dataclass(frozen=True)
class KolmogorovSolution:
    t_grid: np.ndarray
    p: np.ndarray  # (len(t_grid), r)

    def at(self, t: float) -> np.ndarray:
        """Probabilities at ``t``, linearly interpolated between stamps."""
        if t < self.t_grid[0] - 1e-12 or t > self.t_grid[-1] + 1e-12:
            raise ValueError(f"t={t} outside [{self.t_grid[0]}, {self.t_grid[-1]}]")
        return np.array([np.interp(t, self.t_grid, col) for col in self.p.T])

    def to_csv(self, path, stride: int = 1):
        sel = slice(None, None, stride)
        idx = np.arange(len(self.t_grid))[sel]
        if idx[-1] != len(self.t_grid) - 1:
            idx = np.append(idx, len(self.t_grid) - 1)
        header = ["t"] + [f"P{j + 1}" for j in range(self.p.shape[1])]
        write_table(path, header, [self.t_grid[idx]] + [self.p[idx, j] for j in range(self.p.shape[1])])


def default_dt_ode(spec: MarkovSpec) -> float:
    cap = spec.rate_cap
    return 0.01 if cap == 0 else min(0.01, 0.1 / cap)


def kolmogorov_forward(spec: MarkovSpec, horizon: float, dt_ode: float | None = None,
                       initial=None) -> KolmogorovSolution:
    """Integrate dP/dt = P G(t) with classical RK4 from the initial law."""
    if not horizon > 0:
        raise ModelError("horizon must be positive")
    dt_ode = default_dt_ode(spec) if dt_ode is None else dt_ode
    if not dt_ode > 0:
        raise ModelError("dt_ode must be positive")
    n = max(1, math.ceil(horizon / dt_ode - 1e-9))
    dt = horizon / n
    t = np.linspace(0.0, horizon, n + 1)
    p = np.empty((n + 1, spec.n_modes))
    p[0] = spec.initial_distribution if initial is None else initial
    cur = p[0].copy()
    const = not spec.time_varying
    g = spec.generator()
    for s in range(n):
        t0 = t[s]
        if const:
            g1 = g2 = g3 = g
        else:
            # last stage at the left limit so schedule breakpoints fall between steps
            g1, g2, g3 = spec.generator(t0), spec.generator(t0 + 0.5 * dt), spec.generator(t0 + dt * (1 - 1e-9))
        k1 = cur @ g1
        k2 = (cur + 0.5 * dt * k1) @ g2
        k3 = (cur + 0.5 * dt * k2) @ g2
        k4 = (cur + dt * k3) @ g3
        cur = cur + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        total = cur.sum()
        if abs(total - 1.0) > 1e-12:
            cur /= total
        p[s + 1] = cur
    return KolmogorovSolution(t, p)


@dataclass(frozen=True)
class ModePath:
    """Right-continuous piecewise-constant mode signal on [0, horizon]."""

    times: np.ndarray
    modes: np.ndarray
    horizon: float

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        modes = np.asarray(self.modes, dtype=np.int64)
        if times.size == 0 or times[0] != 0.0:
            raise ModelError("mode path must start at t = 0")
        if np.any(np.diff(times) <= 0):
            raise ModelError("jump times must be strictly increasing")
        if np.any(modes[1:] == modes[:-1]):
            raise ModelError("consecutive modes must differ")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "modes", modes)

    @classmethod
    def constant(cls, mode: int, horizon: float) -> "ModePath":
        return cls(np.array([0.0]), np.array([mode]), horizon)

    @property
    def jumps(self) -> list[tuple[float, int]]:
        return list(zip(self.times.tolist(), self.modes.tolist()))

    def mode_at(self, t) -> np.ndarray:
        idx = np.searchsorted(self.times, np.asarray(t, dtype=float), side="right") - 1
        return self.modes[idx]

    def on_steps(self, dt: float, nsteps: int) -> np.ndarray:
        """Active mode at each step boundary t_n = n dt (switches quantized upward)."""
        return self.mode_at(np.arange(nsteps + 1) * dt)

    def to_csv(self, path):
        write_table(path, ["t_jump", "mode_index"], [self.times, self.modes])


def sample_path(spec: MarkovSpec, horizon: float, seed: int) -> ModePath:
    """Draw one path; exact holding times for constant rates, thinning otherwise."""
    if not horizon > 0:
        raise ModelError("horizon must be positive")
    rng = np.random.default_rng(seed)
    r = spec.n_modes
    state = int(rng.choice(r, p=spec.initial_distribution))
    times, modes = [0.0], [state]
    t = 0.0
    if not spec.time_varying:
        rates = spec.rates
        exits = rates.sum(axis=1)
        while True:
            c = exits[state]
            if c <= 0:
                break
            t += rng.exponential(1.0 / c)
            if t >= horizon:
                break
            state = int(rng.choice(r, p=rates[state] / c))
            times.append(t)
            modes.append(state)
    else:
        bound = (r - 1) * spec.rate_cap
        while bound > 0:
            t += rng.exponential(1.0 / bound)
            if t >= horizon:
                break
            row = spec.rates_at(t)[state]
            c = row.sum()
            if rng.random() * bound < c:
                state = int(rng.choice(r, p=row / c))
                times.append(t)
                modes.append(state)
    return ModePath(np.array(times), np.array(modes), horizon)


def mode_distances(spec: MarkovSpec, nominal: Mode, x=None) -> np.ndarray:
    return np.array([mode_distance(m, nominal, x) for m in spec.modes])


def expected_distance(spec: MarkovSpec, ksol: KolmogorovSolution, nominal: Mode, t: float,
                      x=None) -> float:
    """E ||X(t) - X0|| = sum_j P_j(t) ||X_j - X0||."""
    return float(ksol.at(t) @ mode_distances(spec, nominal, x))


def expected_distance_curve(spec: MarkovSpec, ksol: KolmogorovSolution, nominal: Mode, x=None):
    return ksol.p @ mode_distances(spec, nominal, x)
