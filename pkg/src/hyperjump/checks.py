"""Invariant suite run by ``hyperjump check``."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import Scenario
from .experiment import run_ensemble
from .kernel import KernelSolution, solve_kernels
from .lyapunov import FitError, LyapunovParams, choose_params, decay_fit, perturbation_functions
from .markov import ModePath, kolmogorov_forward
from .model import FieldState
from .pde import simulate
from .transform import apply_inverse, apply_transform


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    value: float
    limit: float
    relation: str = "<="

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag}  {self.name}: {self.value:.6g} {self.relation} {self.limit:.6g}"


def _le(name, value, limit):
    return Check(name, bool(value <= limit), float(value), float(limit), "<=")


def _gt(name, value, limit):
    return Check(name, bool(value > limit), float(value), float(limit), ">")


def lyapunov_params(sc: Scenario, ks: KernelSolution) -> LyapunovParams:
    """Configured (nu, a) or, when ``controller.nu`` is null, the swept choice."""
    ctrl = sc.controller
    margin = float(ctrl.get("lyapunov_margin", 0.05))
    if ctrl.get("nu") is not None:
        from .lyapunov import min_weight_a

        a = ctrl.get("a") or min_weight_a(sc.spec.modes, sc.nominal, margin)
        return LyapunovParams(float(ctrl["nu"]), float(a))
    return choose_params(sc.spec, sc.nominal, margin, ks=ks, horizon=sc.sim_config().horizon,
                         cfl=sc.cfl)


def run_checks(sc: Scenario, ks: KernelSolution | None = None, *, ensemble: bool = True) -> list[Check]:
    ctrl = sc.controller
    tol = float(ctrl.get("kernel_tol", 1e-10))
    max_iter = int(ctrl.get("kernel_max_iter", 200))
    n = sc.n_cells
    if ks is None:
        ks = solve_kernels(sc.nominal, n, tol, max_iter)
    out = []

    # kernel residuals: boundary conditions tight, interior shrinking under refinement
    res = ks.residuals
    out.append(_le("kernel fixed-point change", ks.fixed_point_change, 10 * tol))
    out.append(_le("kernel boundary residual", res.max_boundary, 10 * tol))
    fine = solve_kernels(sc.nominal, 2 * n, tol, max_iter).residuals
    order = math.log2(res.max_interior / fine.max_interior) if fine.max_interior > 0 else math.inf
    out.append(Check("kernel interior residual order", bool(order >= 0.8 or res.max_interior <= tol),
                     order, 0.8, ">="))

    # transform round trip on a smooth field
    x = np.linspace(0.0, 1.0, n + 1)
    w = np.vstack([np.sin(2 * np.pi * x), np.cos(3 * x), x**2 - 0.5, np.exp(-x)])
    back = apply_inverse(ks, apply_transform(ks, FieldState(w))).w
    out.append(_le("transform round trip (relative)", np.abs(back - w).max() / np.abs(w).max(), 1e-6))

    # probability conservation
    e = sc.experiment
    horizon = float(e["horizon"])
    ksol = kolmogorov_forward(sc.spec, horizon, e.get("dt_ode"))
    out.append(_le("probability mass drift", np.abs(ksol.p.sum(axis=1) - 1.0).max(), 1e-10))

    # perturbation functions vanish at the nominal mode
    pf = perturbation_functions(ks, sc.nominal, sc.nominal)
    limits = (max(res.max_diagonal, tol), max(res.max_bottom, tol),
              max(res.max_interior_k, tol), max(res.max_interior_n, tol))
    worst = max(np.abs(f).max() / lim for f, lim in zip((pf.f1, pf.f2, pf.f3, pf.f4), limits))
    out.append(_le("nominal f / kernel residual", worst, 10.0))

    # deterministic nominal closed loop
    cfg = sc.sim_config()
    params = lyapunov_params(sc, ks)
    traj = simulate(cfg, ModePath.constant(0, cfg.horizon), sc.nominal, ks, lyap=params)
    beta = np.abs(traj.beta1_series[1:]) / np.maximum(traj.theta_max_series[1:], np.finfo(float).tiny)
    out.append(_le("boundary cancellation |beta(1)|/max|theta|", beta.max(), 1e-4))
    out.append(_le("nominal p(T)/p(0)", traj.p_series[-1] / traj.p_series[0], 0.01))
    tail = float(e.get("tail_fraction", 1.0))
    out.append(_gt("nominal decay rate", _rate(traj.t_grid, traj.p_series, tail), 0.0))
    out.append(_gt("nominal V decay rate", _rate(traj.t_grid, traj.v_series, tail), 0.0))

    if ensemble:
        ens = run_ensemble(cfg, sc.spec, sc.nominal, ks, int(e.get("n_paths", 100)),
                           int(e.get("base_seed", 0)), tail_fraction=tail)
        out.append(_le("ensemble mean_p(T)/mean_p(0)", ens.mean_p[-1] / ens.mean_p[0], 0.01))
        out.append(_gt("ensemble decay rate", ens.fitted[0], 0.0))
    return out


def _rate(t, series, tail):
    try:
        return decay_fit(t, series, tail)[0]
    except FitError:
        return float("nan")
