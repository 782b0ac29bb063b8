"""Plant parameters, mode sets and grids for the 3+1 switching hyperbolic system.

State layout: ``w`` has four rows, rows 0-2 are the rightward-moving
components ``w+`` and row 3 is the leftward-moving ``w-``.  The leftward
speed is stored as a positive magnitude ``mu_minus``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

log = logging.getLogger(__name__)

N_PLUS = 3


class ModelError(ValueError):
    """Invalid plant or Markov data."""


class EvaluationError(ModelError):
    """A coupling profile produced non-finite values."""


@dataclass(frozen=True)
class Profile:
    """A matrix-valued map x -> R^{rows x cols} on [0, 1].

    ``kind`` is one of ``"polynomial"`` (``data[k]`` multiplies ``x**k``) or
    ``"sampled"`` (``data[i]`` is the value at ``i / (len(data) - 1)``,
    linearly interpolated in between).  Constants are degree-0 polynomials.
    """

    kind: str
    data: np.ndarray

    def __post_init__(self):
        data = np.array(self.data, dtype=float)
        if data.ndim != 3:
            raise ModelError(f"profile data must be 3-d, got shape {data.shape}")
        if self.kind not in ("polynomial", "sampled"):
            raise ModelError(f"unknown profile kind {self.kind!r}")
        if self.kind == "sampled" and data.shape[0] < 2:
            raise ModelError("sampled profile needs at least two samples")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @classmethod
    def constant(cls, value) -> "Profile":
        return cls("polynomial", np.asarray(value, dtype=float)[None, ...])

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "Profile":
        return cls.constant(np.zeros((rows, cols)))

    @classmethod
    def polynomial(cls, coeffs) -> "Profile":
        return cls("polynomial", coeffs)

    @classmethod
    def sampled(cls, values) -> "Profile":
        return cls("sampled", values)

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape[1], self.data.shape[2]

    @property
    def is_zero(self) -> bool:
        return not np.any(self.data)

    def __call__(self, x) -> np.ndarray:
        """Evaluate at points ``x``; returns shape ``(len(x), rows, cols)``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self.kind == "polynomial":
            out = np.zeros((x.size,) + self.shape)
            for c in self.data[::-1]:
                out = out * x[:, None, None] + c
        else:
            n = self.data.shape[0] - 1
            u = np.clip(x, 0.0, 1.0) * n
            i0 = np.minimum(np.floor(u).astype(int), n - 1)
            a = (u - i0)[:, None, None]
            out = (1.0 - a) * self.data[i0] + a * self.data[i0 + 1]
        if not np.all(np.isfinite(out)):
            raise EvaluationError("non-finite coupling profile value")
        return out

    def combine(self, other: "Profile", a: float, b: float) -> "Profile":
        """Return the profile ``a * self + b * other``."""
        if self.shape != other.shape:
            raise ModelError("profile shapes differ")
        if self.kind == other.kind == "polynomial":
            n = max(len(self.data), len(other.data))
            out = np.zeros((n,) + self.shape)
            out[: len(self.data)] += a * self.data
            out[: len(other.data)] += b * other.data
            return Profile.polynomial(out)
        n = max(len(p.data) for p in (self, other) if p.kind == "sampled")
        x = np.linspace(0.0, 1.0, n)
        return Profile.sampled(a * self(x) + b * other(x))


@dataclass(frozen=True)
class Mode:
    """One parameter realization of the plant.

    ``sigma_pp`` is 3x3, ``sigma_pm`` 3x1 (w- into w+), ``sigma_mp`` 1x3
    (w+ into w-).  ``q_bound`` is the 3-vector Q of the reflection
    w+(0) = Q w-(0); ``r_bound`` the 3-vector R of w-(1) = R w+(1) + U.
    """

    lambda_plus: np.ndarray
    mu_minus: float
    sigma_pp: Profile = field(default_factory=lambda: Profile.zeros(3, 3))
    sigma_pm: Profile = field(default_factory=lambda: Profile.zeros(3, 1))
    sigma_mp: Profile = field(default_factory=lambda: Profile.zeros(1, 3))
    q_bound: np.ndarray = field(default_factory=lambda: np.zeros(3))
    r_bound: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        lam = np.array(self.lambda_plus, dtype=float).reshape(-1)
        q = np.array(self.q_bound, dtype=float).reshape(-1)
        r = np.array(self.r_bound, dtype=float).reshape(-1)
        if lam.shape != (3,) or q.shape != (3,) or r.shape != (3,):
            raise ModelError("lambda_plus, q_bound and r_bound must have 3 entries")
        mu = float(self.mu_minus)
        if not (np.all(lam > 0) and mu > 0):
            raise ModelError("transport speeds must be positive")
        for name, shape in (("sigma_pp", (3, 3)), ("sigma_pm", (3, 1)), ("sigma_mp", (1, 3))):
            if getattr(self, name).shape != shape:
                raise ModelError(f"{name} must be {shape}")
        for arr in (lam, q, r):
            arr.setflags(write=False)
        object.__setattr__(self, "lambda_plus", lam)
        object.__setattr__(self, "mu_minus", mu)
        object.__setattr__(self, "q_bound", q)
        object.__setattr__(self, "r_bound", r)

    @property
    def max_speed(self) -> float:
        return float(max(self.lambda_plus.max(), self.mu_minus))

    def sigmas(self, x) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Sampled (Σ++, Σ+-, Σ-+) at ``x`` with shapes (n,3,3), (n,3), (n,3)."""
        return self.sigma_pp(x), self.sigma_pm(x)[:, :, 0], self.sigma_mp(x)[:, 0, :]

    def blend(self, other: "Mode", s: float) -> "Mode":
        """The mode ``self + s * (other - self)``."""
        lin = lambda a, b: (1.0 - s) * a + s * b  # noqa: E731
        return Mode(
            lambda_plus=lin(self.lambda_plus, other.lambda_plus),
            mu_minus=lin(self.mu_minus, other.mu_minus),
            sigma_pp=self.sigma_pp.combine(other.sigma_pp, 1.0 - s, s),
            sigma_pm=self.sigma_pm.combine(other.sigma_pm, 1.0 - s, s),
            sigma_mp=self.sigma_mp.combine(other.sigma_mp, 1.0 - s, s),
            q_bound=lin(self.q_bound, other.q_bound),
            r_bound=lin(self.r_bound, other.r_bound),
        )

    def with_(self, **changes) -> "Mode":
        return replace(self, **changes)


def default_norm_points(n: int = 200) -> np.ndarray:
    return np.linspace(0.0, 1.0, n + 1)


def _blocks(m: Mode, x) -> list[float]:
    spp, spm, smp = m.sigmas(x)
    sup_pp = np.linalg.norm(spp, ord=2, axis=(1, 2)).max()
    return [
        np.abs(m.lambda_plus).max() ** 2,
        m.mu_minus**2,
        float(m.q_bound @ m.q_bound),
        float(m.r_bound @ m.r_bound),
        sup_pp**2,
        (spm**2).sum(axis=1).max(),
        (smp**2).sum(axis=1).max(),
    ]


def mode_norm(m: Mode, x=None) -> float:
    """Euclidean-type mode norm; sup over x is a max over the points ``x``."""
    x = default_norm_points() if x is None else np.asarray(x, dtype=float)
    return float(np.sqrt(sum(_blocks(m, x))))


def mode_distance(a: Mode, b: Mode, x=None) -> float:
    """``mode_norm`` of the blockwise difference ``a - b``."""
    x = default_norm_points() if x is None else np.asarray(x, dtype=float)
    pa, pb = a.sigmas(x), b.sigmas(x)
    dpp = pa[0] - pb[0]
    total = (
        np.abs(a.lambda_plus - b.lambda_plus).max() ** 2
        + (a.mu_minus - b.mu_minus) ** 2
        + float(np.sum((a.q_bound - b.q_bound) ** 2))
        + float(np.sum((a.r_bound - b.r_bound) ** 2))
        + np.linalg.norm(dpp, ord=2, axis=(1, 2)).max() ** 2
        + ((pa[1] - pb[1]) ** 2).sum(axis=1).max()
        + ((pa[2] - pb[2]) ** 2).sum(axis=1).max()
    )
    return float(np.sqrt(total))


@dataclass(frozen=True)
class MarkovSpec:
    """Finite-state jump process over ``modes``.

    ``rates[j, k]`` is the transition rate j -> k.  When ``schedule`` is
    given it is a sequence of ``(t_start, t_end, rates)`` covering the
    horizon; outside it ``rates`` applies.
    """

    modes: tuple
    rates: np.ndarray
    initial_distribution: np.ndarray
    schedule: tuple = ()

    def __post_init__(self):
        modes = tuple(self.modes)
        r = len(modes)
        if r == 0:
            raise ModelError("empty mode set")
        rates = _check_rates(self.rates, r)
        p0 = np.array(self.initial_distribution, dtype=float).reshape(-1)
        if p0.shape != (r,) or np.any(p0 < 0) or abs(p0.sum() - 1.0) > 1e-12:
            raise ModelError("initial distribution must be a probability vector over the modes")
        sched = tuple((float(a), float(b), _check_rates(m, r)) for a, b, m in self.schedule)
        for a, b, _ in sched:
            if not b > a:
                raise ModelError("empty schedule interval")
        p0.setflags(write=False)
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "rates", rates)
        object.__setattr__(self, "initial_distribution", p0)
        object.__setattr__(self, "schedule", sched)

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    @property
    def rate_cap(self) -> float:
        """Largest rate over all entries and schedule intervals."""
        return float(max([self.rates.max()] + [m.max() for _, _, m in self.schedule]))

    @property
    def time_varying(self) -> bool:
        return bool(self.schedule)

    def rates_at(self, t: float) -> np.ndarray:
        for a, b, m in self.schedule:
            if a <= t < b:
                return m
        return self.rates

    def exit_rates(self, t: float = 0.0) -> np.ndarray:
        """Total outgoing rate of each mode at time ``t``."""
        return self.rates_at(t).sum(axis=1)

    def generator(self, t: float = 0.0) -> np.ndarray:
        m = self.rates_at(t)
        return m - np.diag(m.sum(axis=1))

    @property
    def max_speed(self) -> float:
        return max(m.max_speed for m in self.modes)


def _check_rates(rates, r: int) -> np.ndarray:
    m = np.array(rates, dtype=float)
    if m.shape != (r, r):
        raise ModelError(f"rate matrix must be {r}x{r}")
    if np.any(m < 0) or not np.all(np.isfinite(m)):
        raise ModelError("rates must be finite and non-negative")
    if np.any(np.diag(m) != 0):
        raise ModelError("rate matrix must have a zero diagonal")
    m.setflags(write=False)
    return m


@dataclass(frozen=True)
class Grid:
    """Uniform grid x_i = i / n_cells with a CFL-limited time step."""

    n_cells: int
    cfl: float = 0.9
    max_speed: float = 1.0

    def __post_init__(self):
        if int(self.n_cells) < 1:
            raise ModelError("n_cells must be positive")
        if not 0.0 < self.cfl <= 1.0:
            raise ModelError("cfl must lie in (0, 1]")
        if not self.max_speed > 0:
            raise ModelError("max_speed must be positive")
        object.__setattr__(self, "n_cells", int(self.n_cells))

    @classmethod
    def for_modes(cls, n_cells: int, modes: Sequence[Mode], cfl: float = 0.9) -> "Grid":
        return cls(n_cells, cfl, max(m.max_speed for m in modes))

    @property
    def h(self) -> float:
        return 1.0 / self.n_cells

    @property
    def x(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n_cells + 1)

    @property
    def dt(self) -> float:
        return self.cfl / (self.n_cells * self.max_speed)

    def admits(self, speed: float) -> bool:
        return self.dt * speed * self.n_cells <= 1.0 + 1e-12


@dataclass
class FieldState:
    w: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=float)
        if self.w.ndim != 2 or self.w.shape[0] != 4:
            raise ModelError(f"field must have shape (4, N+1), got {self.w.shape}")
        if not np.all(np.isfinite(self.w)):
            raise ModelError("field has non-finite entries")

    @property
    def n_cells(self) -> int:
        return self.w.shape[1] - 1

    @property
    def plus(self) -> np.ndarray:
        return self.w[:3]

    @property
    def minus(self) -> np.ndarray:
        return self.w[3]


def normalize_speed(value: float) -> float:
    """Leftward speeds may be written with a sign; only the magnitude is used."""
    if value < 0:
        log.info("leftward speed %g given with negative sign; using |%g|", value, value)
    return abs(float(value))
