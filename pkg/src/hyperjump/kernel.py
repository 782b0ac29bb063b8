"""Backstepping kernels K (1x3 row) and N (scalar) on the triangle 0 <= xi <= x <= 1.

The kernel equations, with mu the leftward speed and Λ = diag(lambda_plus):

    -mu K_x + K_xi Λ = -K Σ++(xi) - Σ-+(xi) N
     mu (N_x + N_xi)  =  K Σ+-(xi)
    (-mu I - Λ) K(x, x)^T = Σ-+(x)^T
    -mu N(x, 0) + K(x, 0) Λ Q = 0

Each K component is constant along (-mu, lambda_i) up to its source, so it
is recovered by integrating from the diagonal; N is carried along the
diagonal direction from its data at xi = 0.  The coupled integral equations
are solved by Picard (successive approximation) iteration.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from . import _accel
from .model import Mode, ModelError

log = logging.getLogger(__name__)


class KernelConvergenceError(RuntimeError):
    def __init__(self, message, last_change):
        super().__init__(message)
        self.last_change = last_change


class MeshMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class ResidualSummary:
    """Max and L2 residuals of the four kernel equations.

    ``interior_k``/``interior_n`` use one-sided differences pointing along
    the characteristics: backward in x and forward in xi for K, and the
    diagonal difference for N.  They are O(h) discretization residuals.
    """

    max_interior_k: float
    max_interior_n: float
    max_diagonal: float
    max_bottom: float
    l2_interior_k: float
    l2_interior_n: float
    l2_diagonal: float
    l2_bottom: float

    @property
    def max_interior(self) -> float:
        return max(self.max_interior_k, self.max_interior_n)

    @property
    def max_boundary(self) -> float:
        return max(self.max_diagonal, self.max_bottom)

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass(frozen=True)
class KernelSolution:
    """Kernels on nodes (x_i, xi_j), j <= i, of a uniform M x M mesh.

    ``k`` has shape (3, M+1, M+1) and ``n`` shape (M+1, M+1), indexed
    ``[i, j]`` with entries above the diagonal set to zero.
    """

    k: np.ndarray
    n: np.ndarray
    iterations: int = 0
    changes: tuple = ()
    residuals: ResidualSummary | None = field(default=None, compare=False)

    def __post_init__(self):
        k = np.array(self.k, dtype=float)
        n = np.array(self.n, dtype=float)
        if k.ndim != 3 or k.shape[0] != 3 or k.shape[1:] != n.shape or n.shape[0] != n.shape[1]:
            raise MeshMismatchError("inconsistent kernel array shapes")
        k.setflags(write=False)
        n.setflags(write=False)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "n", n)

    @property
    def resolution(self) -> int:
        return self.n.shape[0] - 1

    @property
    def x(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.resolution + 1)

    @property
    def fixed_point_change(self) -> float:
        """Max-norm change of the last Picard iteration."""
        return self.changes[-1] if self.changes else 0.0

    @property
    def residual_report(self) -> dict:
        out = {"iterations": self.iterations, "fixed_point_change": self.fixed_point_change}
        if self.residuals is not None:
            out.update(self.residuals.as_dict())
        return out

    @classmethod
    def zeros(cls, resolution: int) -> "KernelSolution":
        m = resolution + 1
        return cls(np.zeros((3, m, m)), np.zeros((m, m)))

    def check_grid(self, n_cells: int):
        if n_cells != self.resolution:
            raise MeshMismatchError(f"kernel mesh M={self.resolution} does not match grid N={n_cells}")


def _boundary_data(nominal: Mode, M: int):
    """Diagonal values of K carried to every node along its characteristic."""
    h = 1.0 / M
    lam, mu = nominal.lambda_plus, nominal.mu_minus
    ii, jj = np.tril_indices(M + 1)
    kd = np.zeros((3, M + 1, M + 1))
    for c in range(3):
        xd = (lam[c] * ii * h + mu * jj * h) / (lam[c] + mu)
        smp = nominal.sigma_mp(xd)[:, 0, c]
        kd[c, ii, jj] = -smp / (mu + lam[c])
    return kd


def _n_from_k(k, spm, lamq, mu, M):
    """Carry N from xi = 0 along the diagonal direction."""
    h = 1.0 / M
    n = np.zeros((M + 1, M + 1))
    n[:, 0] = np.einsum("c,ci->i", lamq, k[:, :, 0]) / mu
    if spm is None:
        for j in range(1, M + 1):
            n[j:, j] = n[j - 1 : -1, j - 1]
        return n
    g = np.einsum("cij,jc->ij", k, spm)
    for j in range(1, M + 1):
        n[j:, j] = n[j - 1 : -1, j - 1] + (0.5 * h / mu) * (g[j:, j] + g[j - 1 : -1, j - 1])
    return n


def _sources(k, n, spp, smp):
    s = -np.einsum("lij,jlc->cij", k, spp) - np.einsum("jc,ij->cij", smp, n)
    return np.tril(s)


def solve_kernels(nominal: Mode, mesh_resolution: int, tol: float = 1e-10,
                  max_iter: int = 200, use_numba=None) -> KernelSolution:
    """Solve the kernel equations for ``nominal`` on an M x M triangular mesh."""
    M = int(mesh_resolution)
    if M < 8:
        raise ModelError("mesh_resolution must be at least 8")
    if not tol > 0:
        raise ModelError("tol must be positive")
    lam, mu = nominal.lambda_plus, nominal.mu_minus
    if not (np.all(lam > 0) and mu > 0):
        raise ModelError("transport speeds must be positive")
    xi = np.linspace(0.0, 1.0, M + 1)
    spp, spm, smp = nominal.sigmas(xi)
    lamq = lam * nominal.q_bound

    kd = _boundary_data(nominal, M)
    # iterate zero: boundary data transported without sources
    k = kd.copy()
    n = _n_from_k(k, None, lamq, mu, M)
    changes = []
    for it in range(1, max_iter + 1):
        s = _sources(k, n, spp, smp)
        k_new = _accel.characteristic_sweep(kd, s, lam, mu, M, use_numba=use_numba)
        n_new = _n_from_k(k_new, spm, lamq, mu, M)
        change = max(np.abs(k_new - k).max(), np.abs(n_new - n).max())
        changes.append(float(change))
        k, n = k_new, n_new
        log.debug("kernel iteration %d: change %.3e", it, change)
        if not np.isfinite(change):
            raise KernelConvergenceError("kernel iteration diverged", change)
        if change < tol:
            break
    else:
        raise KernelConvergenceError(
            f"no convergence after {max_iter} iterations (last change {changes[-1]:.3e})", changes[-1]
        )
    if any(b > a for a, b in zip(changes[1:], changes[2:])):
        log.warning("kernel iteration changes are not monotone after the first step: %s", changes)
    sol = KernelSolution(k, n, iterations=len(changes), changes=tuple(changes))
    res = kernel_residuals(sol, nominal)
    return KernelSolution(k, n, iterations=len(changes), changes=tuple(changes), residuals=res)


def _interior_terms(ks: KernelSolution, mode: Mode):
    """Differences and couplings shared by the residuals and the f-functions.

    Returns per-node arrays on the mesh: kx, kxi (3, M+1, M+1, valid where
    1 <= i - j), ndiag (valid where j >= 1), and the couplings at xi_j.
    """
    M = ks.resolution
    h = 1.0 / M
    k, n = ks.k, ks.n
    kx = np.zeros_like(k)
    kxi = np.zeros_like(k)
    kx[:, 1:, :] = (k[:, 1:, :] - k[:, :-1, :]) / h
    kxi[:, :, :-1] = (k[:, :, 1:] - k[:, :, :-1]) / h
    ndiag = np.zeros_like(n)
    ndiag[1:, 1:] = (n[1:, 1:] - n[:-1, :-1]) / h
    xi = ks.x
    spp, spm, smp = mode.sigmas(xi)
    return kx, kxi, ndiag, spp, spm, smp


def interior_masks(M: int):
    i, j = np.indices((M + 1, M + 1))
    return (i - j) >= 1, (j >= 1) & (j <= i)


def equation_fields(ks: KernelSolution, mode: Mode):
    """Pointwise (g_k, g_n, g_diag, g_bottom) of the kernel equations evaluated with ``mode``.

    With ``mode`` equal to the nominal mode these are the kernel residuals;
    with another mode they are the perturbation functions.
    """
    lam, mu = mode.lambda_plus, mode.mu_minus
    kx, kxi, ndiag, spp, spm, smp = _interior_terms(ks, mode)
    k, n = ks.k, ks.n
    g_k = (mu * kx - kxi * lam[:, None, None]
           - np.einsum("lij,jlc->cij", k, spp) - np.einsum("jc,ij->cij", smp, n))
    g_n = mu * ndiag - np.einsum("cij,jc->ij", k, spm)
    kdiag = np.stack([np.diagonal(k[c]) for c in range(3)])  # (3, M+1)
    g_diag = smp.T + mu * kdiag + kdiag * lam[:, None]
    g_bottom = -np.einsum("c,ci->i", lam * mode.q_bound, k[:, :, 0]) + mu * n[:, 0]
    mk, mn = interior_masks(ks.resolution)
    g_k = np.where(mk[None], g_k, 0.0)
    g_n = np.where(mn, g_n, 0.0)
    return g_k, g_n, g_diag, g_bottom


def kernel_residuals(ks: KernelSolution, nominal: Mode, n_cells: int | None = None) -> ResidualSummary:
    if n_cells is not None:
        ks.check_grid(n_cells)
    g_k, g_n, g_diag, g_bottom = equation_fields(ks, nominal)
    M = ks.resolution
    h = 1.0 / M
    area = h * h

    def l2_2d(g):
        return float(np.sqrt(area * np.sum(g**2)))

    return ResidualSummary(
        max_interior_k=float(np.abs(g_k).max()),
        max_interior_n=float(np.abs(g_n).max()),
        max_diagonal=float(np.abs(g_diag).max()),
        max_bottom=float(np.abs(g_bottom).max()),
        l2_interior_k=l2_2d(g_k),
        l2_interior_n=l2_2d(g_n),
        l2_diagonal=float(np.sqrt(h * np.sum(g_diag**2))),
        l2_bottom=float(np.sqrt(h * np.sum(g_bottom**2))),
    )


CSV_HEADER = ["x", "xi", "k1", "k2", "k3", "n"]


def save_csv(ks: KernelSolution, path):
    from .io import atomic_writer, fmt

    M = ks.resolution
    x = ks.x
    with atomic_writer(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for i in range(M + 1):
            for j in range(i + 1):
                w.writerow([fmt(x[i]), fmt(x[j]), fmt(ks.k[0, i, j]), fmt(ks.k[1, i, j]),
                            fmt(ks.k[2, i, j]), fmt(ks.n[i, j])])


def load_csv(path) -> KernelSolution:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if rows[0] != CSV_HEADER:
        raise ValueError(f"unexpected kernel CSV header {rows[0]}")
    data = np.array(rows[1:], dtype=float)
    count = len(data)
    M = int(round((np.sqrt(8 * count + 1) - 3) / 2))
    if (M + 1) * (M + 2) // 2 != count:
        raise MeshMismatchError("kernel CSV does not hold a full triangle")
    ii, jj = np.tril_indices(M + 1)
    k = np.zeros((3, M + 1, M + 1))
    n = np.zeros((M + 1, M + 1))
    for c in range(3):
        k[c, ii, jj] = data[:, 2 + c]
    n[ii, jj] = data[:, 5]
    return KernelSolution(k, n)
