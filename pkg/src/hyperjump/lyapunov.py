"""Lyapunov functional, perturbation functions and empirical decay certificates."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .kernel import KernelSolution, equation_fields
from .model import FieldState, MarkovSpec, Mode, ModelError
from .transform import apply_transform, trapezoid_weights

log = logging.getLogger(__name__)


class FitError(ValueError):
    pass


class ParameterSearchError(RuntimeError):
    pass


@dataclass(frozen=True)
class LyapunovParams:
    nu: float
    a: float

    def __post_init__(self):
        if not (self.nu >= 0 and self.a > 0):
            raise ModelError("need nu >= 0 and a > 0")

    def admissible_for(self, modes) -> bool:
        """Strict boundary condition a > |Q_j|^2 for every mode."""
        return all(self.a > float(m.q_bound @ m.q_bound) for m in modes)


def lyapunov_weights(mode: Mode, params: LyapunovParams, x) -> np.ndarray:
    """Diagonal weights D_j(x), shape (4, len(x))."""
    x = np.asarray(x, dtype=float)
    lam, mu, nu = mode.lambda_plus, mode.mu_minus, params.nu
    d = np.empty((4, x.size))
    d[:3] = np.exp(-nu * x[None, :] / lam[:, None]) / lam[:, None]
    d[3] = params.a * np.exp(nu * x / mu) / mu
    return d


def evaluate_V(s: FieldState, ks: KernelSolution, mode_j: Mode, p: LyapunovParams) -> float:
    theta = apply_transform(ks, s).theta
    x = np.linspace(0.0, 1.0, s.n_cells + 1)
    d = lyapunov_weights(mode_j, p, x)
    return float(trapezoid_weights(s.n_cells) @ (d * theta**2).sum(axis=0))


def weight_bounds(mode_j: Mode, p: LyapunovParams, x) -> tuple[float, float]:
    """(k1, k2): extrema of the diagonal weights, so k1 |theta|^2 <= V <= k2 |theta|^2."""
    d = lyapunov_weights(mode_j, p, x)
    return float(d.min()), float(d.max())


@dataclass(frozen=True)
class PerturbationFunctions:
    """Sampled f1 (3, M+1) on the diagonal, f2 (M+1,) on xi = 0,
    f3 (3, M+1, M+1) and f4 (M+1, M+1) on the triangle."""

    f1: np.ndarray
    f2: np.ndarray
    f3: np.ndarray
    f4: np.ndarray

    def sup_norms(self) -> np.ndarray:
        return np.array([
            np.linalg.norm(self.f1, axis=0).max(),
            np.abs(self.f2).max(),
            np.linalg.norm(self.f3, axis=0).max(),
            np.abs(self.f4).max(),
        ])


def perturbation_functions(ks: KernelSolution, mode_j: Mode, nominal: Mode | None = None) -> PerturbationFunctions:
    """Evaluate f1..f4 for mode j against the nominal kernels ``ks``.

    The finite-difference stencils are those of ``kernel_residuals``, so at
    the nominal mode f3 and f4 are exactly the interior kernel residuals.
    """
    g_k, g_n, g_diag, g_bottom = equation_fields(ks, mode_j)
    return PerturbationFunctions(f1=g_diag, f2=g_bottom, f3=g_k, f4=g_n)


def lemma3_ratio(pf: PerturbationFunctions, dist: float, floor: float = 0.0) -> float:
    """max_i sup|f_i| / dist, an empirical candidate for the perturbation-bound constant M0.

    With ``dist == 0`` the ratio is 0 when every sup-norm is at most
    ``floor`` and infinite otherwise.
    """
    top = float(pf.sup_norms().max())
    if dist <= 0:
        return 0.0 if top <= floor else float("inf")
    return top / dist


def decay_fit(t_grid, series, tail_fraction: float = 1.0) -> tuple[float, float]:
    """Least-squares fit of log(series) on the tail; returns (rate, amplitude).

    ``rate`` is minus the slope; ``amplitude`` is exp(intercept) / series[0].
    """
    t = np.asarray(t_grid, dtype=float)
    y = np.asarray(series, dtype=float)
    if not 0.0 < tail_fraction <= 1.0:
        raise FitError("tail_fraction must lie in (0, 1]")
    t_start = t[-1] - tail_fraction * (t[-1] - t[0])
    sel = t >= t_start - 1e-12 * max(1.0, abs(t[-1]))
    if sel.sum() < 2:
        raise FitError("fewer than two samples in the fitted tail")
    if np.any(y[sel] <= 0) or not np.all(np.isfinite(y[sel])):
        raise FitError("series must be positive on the fitted tail")
    slope, intercept = np.polyfit(t[sel], np.log(y[sel]), 1)
    return float(-slope), float(np.exp(intercept) / y[0])


def step_monotonicity(t_grid, v_series, t_start: float, eps: float) -> float:
    """Largest V(t_{n+1}) / V(t_n) - 1 after ``t_start``; <= eps means monotone decay."""
    t = np.asarray(t_grid)
    v = np.asarray(v_series)
    sel = t[:-1] >= t_start
    ratios = v[1:][sel] / v[:-1][sel]
    return float(ratios.max() - 1.0) if ratios.size else 0.0


def min_weight_a(modes, nominal: Mode, margin: float) -> float:
    """a = (1 + margin) * max_j |Q_j|^2, floored at ``margin`` when every Q vanishes."""
    qmax = max(float(m.q_bound @ m.q_bound) for m in list(modes) + [nominal])
    return (1.0 + margin) * qmax if qmax > 0 else margin


NU_SWEEP = tuple(10.0 ** k for k in np.arange(-5.0, 0.5, 0.5))


def choose_params(spec: MarkovSpec, nominal: Mode, margin: float, *, ks: KernelSolution | None = None,
                  n_cells: int = 100, horizon: float = 400.0, cfl: float = 0.9,
                  tail_fraction: float = 0.5, sweep=NU_SWEEP) -> LyapunovParams:
    """Pick a from the Q bound and the smallest swept nu giving a decaying nominal V."""
    from .kernel import solve_kernels
    from .markov import ModePath
    from .model import Grid
    from .pde import SimConfig, simulate

    if not margin > 0:
        raise ModelError("margin must be positive")
    a = min_weight_a(spec.modes, nominal, margin)
    if ks is None:
        ks = solve_kernels(nominal, n_cells)
    grid = Grid.for_modes(ks.resolution, [nominal], cfl)
    cfg = SimConfig(grid, horizon)
    tried = []
    for nu in sweep:
        params = LyapunovParams(float(nu), a)
        traj = simulate(cfg, ModePath.constant(0, horizon), nominal, ks, lyap=params)
        try:
            rate, _ = decay_fit(traj.t_grid, traj.v_series, tail_fraction)
        except FitError:
            rate = float("nan")
        tried.append((nu, rate))
        if rate > 0:
            log.info("choose_params: nu=%g gives decay rate %g", nu, rate)
            return params
    raise ParameterSearchError(f"no swept nu produced a decaying V: {tried}")


def diagnostic_report(ks: KernelSolution, spec: MarkovSpec, nominal: Mode, params: LyapunovParams,
                      fitted=None, ksol=None, x=None) -> dict:
    """Plain-data summary: parameter choices, empirical M0 per mode, fitted decay,
    and the expected mode distance E||X(t) - X0|| along the Kolmogorov solution."""
    from .markov import expected_distance_curve
    from .model import mode_distance

    floor = 10.0 * ks.residuals.max_interior if ks.residuals is not None else 0.0
    per_mode = []
    for j, m in enumerate(spec.modes):
        pf = perturbation_functions(ks, m, nominal)
        d = mode_distance(m, nominal, x)
        per_mode.append({"mode": j, "distance": d, "sup_f": pf.sup_norms().tolist(),
                         "m0_ratio": lemma3_ratio(pf, d, floor)})
    out = {"nu": params.nu, "a": params.a, "modes": per_mode}
    if fitted is not None:
        out["zeta"], out["varsigma"] = float(fitted[0]), float(fitted[1])
    if ksol is not None:
        curve = expected_distance_curve(spec, ksol, nominal, x)
        out["expected_distance"] = {"t0": float(curve[0]), "t_end": float(curve[-1]),
                                    "max": float(curve.max()), "mean": float(curve.mean())}
    return out
