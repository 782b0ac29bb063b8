"""Hot loops: characteristic sweep for the kernels and the upwind time stepper.

Each kernel exists twice, a numba ``@njit`` version and a vectorized numpy
version with identical arithmetic.  Set ``HYPERJUMP_PURE_NUMPY=1`` to force
the numpy path (also used automatically when numba is unavailable).
"""
from __future__ import annotations

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and os.environ.get("HYPERJUMP_PURE_NUMPY", "0") not in ("1", "true", "yes")


def _njit(fn):
    if not HAVE_NUMBA:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)


# ---------------------------------------------------------------- kernels


@_njit
def _tri_interp_nb(F, x, xi, M):
    # piecewise-linear on the mesh triangulated along the x = xi direction
    u = x * M
    v = xi * M
    if v > u:
        v = u
    i0 = int(np.floor(u))
    if i0 > M - 1:
        i0 = M - 1
    if i0 < 0:
        i0 = 0
    j0 = int(np.floor(v))
    if j0 > i0:
        j0 = i0
    if j0 < 0:
        j0 = 0
    a = u - i0
    b = v - j0
    if b <= a:
        return F[i0, j0] + a * (F[i0 + 1, j0] - F[i0, j0]) + b * (F[i0 + 1, j0 + 1] - F[i0 + 1, j0])
    return F[i0, j0] + b * (F[i0, j0 + 1] - F[i0, j0]) + a * (F[i0 + 1, j0 + 1] - F[i0, j0 + 1])


@_njit
def _sweep_nb(kd_foot, S, lam, mu, M):
    h = 1.0 / M
    K = np.zeros_like(kd_foot)
    for c in range(3):
        sp = lam[c] + mu
        Sc = S[c]
        for i in range(M + 1):
            x = i * h
            K[c, i, i] = kd_foot[c, i, i]
            for j in range(i):
                xi = j * h
                xd = (lam[c] * x + mu * xi) / sp
                m = i - j
                acc = 0.5 * (Sc[i, j] + _tri_interp_nb(Sc, xd, xd, M))
                for k in range(1, m):
                    th = k / m
                    acc += _tri_interp_nb(Sc, x + th * (xd - x), xi + th * (xd - xi), M)
                K[c, i, j] = kd_foot[c, i, j] - (m * h / sp) * acc / m
    return K


def tri_interp_np(F, x, xi, M):
    u = np.asarray(x, dtype=float) * M
    v = np.minimum(np.asarray(xi, dtype=float) * M, u)
    i0 = np.clip(np.floor(u).astype(np.int64), 0, M - 1)
    j0 = np.clip(np.floor(v).astype(np.int64), 0, None)
    j0 = np.minimum(j0, i0)
    a = u - i0
    b = v - j0
    f00 = F[i0, j0]
    f11 = F[i0 + 1, j0 + 1]
    lower = f00 + a * (F[i0 + 1, j0] - f00) + b * (f11 - F[i0 + 1, j0])
    # F[i0, j0+1] lies above the diagonal on diagonal cells; it is never selected there
    j1 = np.minimum(j0 + 1, M)
    upper = f00 + b * (F[i0, j1] - f00) + a * (f11 - F[i0, j1])
    return np.where(b <= a, lower, upper)


def _sweep_np(kd_foot, S, lam, mu, M):
    h = 1.0 / M
    K = np.zeros_like(kd_foot)
    for c in range(3):
        sp = lam[c] + mu
        K[c][np.diag_indices(M + 1)] = np.diagonal(kd_foot[c])
        for i in range(1, M + 1):
            j = np.arange(i)
            x = i * h
            xi = j * h
            xd = (lam[c] * x + mu * xi) / sp
            m = (i - j).astype(float)
            # quadrature nodes k = 0..m_j, padded to k = 0..i
            k = np.arange(i + 1)[None, :]
            th = np.minimum(k / m[:, None], 1.0)
            px = x + th * (xd - x)[:, None]
            pxi = xi[:, None] + th * (xd - xi)[:, None]
            vals = tri_interp_np(S[c], px, pxi, M)
            w = np.where(k < m[:, None], 1.0, 0.0)
            w[:, 0] = 0.5
            w[np.arange(i), (i - j)] = 0.5
            acc = (w * vals).sum(axis=1)
            K[c, i, :i] = kd_foot[c, i, :i] - (m * h / sp) * acc / m
    return K


def characteristic_sweep(kd_foot, S, lam, mu, M, use_numba=None):
    """Integrate the K-kernel sources along each characteristic to the diagonal."""
    use = USE_NUMBA if use_numba is None else (use_numba and HAVE_NUMBA)
    args = (np.ascontiguousarray(kd_foot), np.ascontiguousarray(S), np.asarray(lam, float), float(mu), int(M))
    return _sweep_nb(*args) if use else _sweep_np(*args)


# ---------------------------------------------------------------- upwind


@_njit
def _run_nb(w0, mode_idx, lam, mu, spp, spm, smp, q, r, kw, nw, r0, control, dt, h, stride,
            want_v, bk, bn, dw):
    n = w0.shape[1] - 1
    nsteps = mode_idx.shape[0] - 1
    nsnap = nsteps // stride + 1
    p = np.zeros(nsteps + 1)
    u = np.zeros(nsteps + 1)
    v = np.zeros(nsteps + 1)
    b1 = np.zeros(nsteps + 1)
    tmax = np.zeros(nsteps + 1)
    snaps = np.zeros((nsnap, 4, n + 1))
    wts = np.full(n + 1, h)
    wts[0] = 0.5 * h
    wts[n] = 0.5 * h
    w = w0.copy()
    new = np.empty_like(w)
    beta = np.empty(n + 1)
    diverged = -1
    for step in range(nsteps + 1):
        jm = mode_idx[step]
        if step > 0:
            ja = mode_idx[step - 1]
            cm = mu[ja] * dt / h
            for k in range(3):
                ck = lam[ja, k] * dt / h
                for i in range(1, n + 1):
                    src = spm[ja, i, k] * w[3, i]
                    for l in range(3):
                        src += spp[ja, i, k, l] * w[l, i]
                    new[k, i] = w[k, i] - ck * (w[k, i] - w[k, i - 1]) + dt * src
            for i in range(n):
                src = 0.0
                for l in range(3):
                    src += smp[ja, i, l] * w[l, i]
                new[3, i] = w[3, i] + cm * (w[3, i + 1] - w[3, i]) + dt * src
            for k in range(3):
                new[k, 0] = q[ja, k] * new[3, 0]
            refl = 0.0
            for k in range(3):
                refl += r[ja, k] * new[k, n]
            if control:
                rest = 0.0
                gap = 0.0
                for k in range(3):
                    gap += (r[ja, k] - r0[k]) * new[k, n]
                    for j in range(n + 1):
                        rest += kw[k, j] * new[k, j]
                for j in range(n):
                    rest += nw[j] * new[3, j]
                new[3, n] = (gap + rest) / (1.0 - nw[n])
            else:
                new[3, n] = refl
            w, new = new, w
            ok = True
            for k in range(4):
                for i in range(n + 1):
                    if not np.isfinite(w[k, i]):
                        ok = False
            if not ok:
                diverged = step
                break
        # records
        acc = 0.0
        for i in range(n + 1):
            s = 0.0
            for k in range(4):
                s += w[k, i] * w[k, i]
            acc += wts[i] * s
        p[step] = acc
        if control:
            uu = 0.0
            for k in range(3):
                uu -= r0[k] * w[k, n]
                for j in range(n + 1):
                    uu += kw[k, j] * w[k, j]
            for j in range(n + 1):
                uu += nw[j] * w[3, j]
            u[step] = uu
        if want_v:
            vv = 0.0
            mx = 0.0
            for i in range(n + 1):
                bb = w[3, i]
                for j in range(i + 1):
                    bb -= bk[0, i, j] * w[0, j] + bk[1, i, j] * w[1, j] + bk[2, i, j] * w[2, j] + bn[i, j] * w[3, j]
                beta[i] = bb
                for k in range(3):
                    vv += dw[jm, k, i] * w[k, i] * w[k, i]
                    if abs(w[k, i]) > mx:
                        mx = abs(w[k, i])
                vv += dw[jm, 3, i] * bb * bb
                if abs(bb) > mx:
                    mx = abs(bb)
            v[step] = vv
            b1[step] = beta[n]
            tmax[step] = mx
        if step % stride == 0:
            snaps[step // stride] = w
    return p, u, v, b1, tmax, snaps, diverged


def _run_np(w0, mode_idx, lam, mu, spp, spm, smp, q, r, kw, nw, r0, control, dt, h, stride,
            want_v, bk, bn, dw):
    n = w0.shape[1] - 1
    nsteps = mode_idx.shape[0] - 1
    nsnap = nsteps // stride + 1
    p = np.zeros(nsteps + 1)
    u = np.zeros(nsteps + 1)
    v = np.zeros(nsteps + 1)
    b1 = np.zeros(nsteps + 1)
    tmax = np.zeros(nsteps + 1)
    snaps = np.zeros((nsnap, 4, n + 1))
    wts = np.full(n + 1, h)
    wts[[0, n]] = 0.5 * h
    w = w0.copy()
    diverged = -1
    for step in range(nsteps + 1):
        jm = mode_idx[step]
        if step > 0:
            ja = mode_idx[step - 1]
            new = np.empty_like(w)
            c = (lam[ja] * dt / h)[:, None]
            src = np.einsum("ikl,li->ki", spp[ja, 1:], w[:3, 1:]) + spm[ja, 1:].T * w[3, 1:]
            new[:3, 1:] = w[:3, 1:] - c * (w[:3, 1:] - w[:3, :-1]) + dt * src
            cm = mu[ja] * dt / h
            new[3, :-1] = w[3, :-1] + cm * (w[3, 1:] - w[3, :-1]) + dt * np.einsum("il,li->i", smp[ja, :-1], w[:3, :-1])
            new[:3, 0] = q[ja] * new[3, 0]
            if control:
                gap = (r[ja] - r0) @ new[:3, n]
                rest = (kw * new[:3]).sum() + nw[:n] @ new[3, :n]
                new[3, n] = (gap + rest) / (1.0 - nw[n])
            else:
                new[3, n] = r[ja] @ new[:3, n]
            w = new
            if not np.all(np.isfinite(w)):
                diverged = step
                break
        p[step] = wts @ (w * w).sum(axis=0)
        if control:
            u[step] = -r0 @ w[:3, n] + (kw * w[:3]).sum() + nw @ w[3]
        if want_v:
            beta = w[3] - np.einsum("kij,kj->i", bk, w[:3]) - bn @ w[3]
            v[step] = (dw[jm, :3] * w[:3] ** 2).sum() + dw[jm, 3] @ beta**2
            b1[step] = beta[n]
            tmax[step] = max(np.abs(w[:3]).max(), np.abs(beta).max())
        if step % stride == 0:
            snaps[step // stride] = w
    return p, u, v, b1, tmax, snaps, diverged


def run_upwind(*args, use_numba=None):
    """Advance the switching closed loop over all steps in ``mode_idx``.

    Returns ``(p, u, v, beta1, theta_max, snapshots, diverged_step)``;
    ``diverged_step`` is -1 when every step stayed finite.
    """
    use = USE_NUMBA if use_numba is None else (use_numba and HAVE_NUMBA)
    return _run_nb(*args) if use else _run_np(*args)
