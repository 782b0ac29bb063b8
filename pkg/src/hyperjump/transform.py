"""Volterra backstepping map w -> theta = (w+, beta), its inverse, and the control law."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .kernel import KernelSolution
from .model import FieldState, Mode


@dataclass
class TargetState:
    theta: np.ndarray
    t: float = 0.0

    @property
    def alpha(self) -> np.ndarray:
        return self.theta[:3]

    @property
    def beta(self) -> np.ndarray:
        return self.theta[3]


def trapezoid_weights(n_cells: int) -> np.ndarray:
    h = 1.0 / n_cells
    w = np.full(n_cells + 1, h)
    w[[0, -1]] = 0.5 * h
    return w


def volterra_matrices(ks: KernelSolution):
    """Quadrature-weighted kernels: ``bk[c] @ f`` ~ int_0^x K_c(x, xi) f(xi) dxi.

    Row i holds composite trapezoid weights over [0, x_i]; row 0 is zero.
    """
    M = ks.resolution
    h = 1.0 / M
    wts = np.tril(np.full((M + 1, M + 1), h))
    idx = np.arange(M + 1)
    wts[:, 0] *= 0.5
    wts[idx, idx] *= 0.5
    wts[0, 0] = 0.0
    return ks.k * wts[None], ks.n * wts


def apply_transform(ks: KernelSolution, s: FieldState) -> TargetState:
    ks.check_grid(s.n_cells)
    bk, bn = volterra_matrices(ks)
    theta = s.w.copy()
    theta[3] = s.w[3] - np.einsum("cij,cj->i", bk, s.w[:3]) - bn @ s.w[3]
    return TargetState(theta, s.t)


def apply_inverse(ks: KernelSolution, ts: TargetState) -> FieldState:
    """Recover w from theta by forward substitution in x."""
    ks.check_grid(ts.theta.shape[1] - 1)
    bk, bn = volterra_matrices(ks)
    w = ts.theta.copy()
    rhs = ts.theta[3] + np.einsum("cij,cj->i", bk, ts.theta[:3])
    a = np.eye(bn.shape[0]) - bn
    w[3] = solve_triangular(a, rhs, lower=True)
    return FieldState(w, ts.t)


def control_weights(ks: KernelSolution):
    """Trapezoid-weighted rows K(1, .) and N(1, .) used by the control law."""
    wts = trapezoid_weights(ks.resolution)
    return ks.k[:, -1, :] * wts, ks.n[-1, :] * wts


def control_input(ks: KernelSolution, nominal: Mode, s: FieldState) -> float:
    """U = -R0 w+(1) + int_0^1 K(1, xi) w+(xi) + N(1, xi) w-(xi) dxi."""
    ks.check_grid(s.n_cells)
    kw, nw = control_weights(ks)
    return float(-nominal.r_bound @ s.w[:3, -1] + np.sum(kw * s.w[:3]) + nw @ s.w[3])
