"""JSON configuration: schema, loading, dotted overrides and the built-in scenarios.

Layout::

    {
      "modes":      {"nominal": MODE, "family": [PARTIAL_MODE, ...]},
      "markov":     {"rates": [[...]], "initial_distribution": [...], "schedule": [...]},
      "grid":       {"n_cells": 100, "cfl": 0.9},
      "controller": {"type": "nominal_backstepping", "kernel_tol": 1e-10,
                     "kernel_max_iter": 200, "lyapunov_margin": 0.05, "nu": null},
      "experiment": {"horizon": 400.0, "initial_condition": "sinusoidal",
                     "n_paths": 100, "base_seed": 0, "snapshot_stride": 0,
                     "tail_fraction": 1.0, "dt_ode": null}
    }

MODE fields: ``lambda_plus`` (3), ``lambda_minus`` (sign ignored), ``q`` (3),
``r`` (3) and the couplings ``sigma_pp``, ``sigma_pm``, ``sigma_mp``.  A
coupling is ``"zero"``, a preset name from ``SIGMA_PRESETS``, or an object
``{"kind": "constant", "value": ...}``, ``{"kind": "polynomial", "coeffs": ...}``
or ``{"kind": "sampled", "values": ...}``.  Family entries override fields of
the nominal mode.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import Grid, MarkovSpec, Mode, ModelError, Profile, normalize_speed

SECTIONS = ("modes", "markov", "grid", "controller", "experiment")

# Couplings for the built-in scenario.  The reference example leaves them
# unspecified; these are small relative to the transport speeds.
REFERENCE_SIGMA = {
    "sigma_pp": {"kind": "polynomial", "coeffs": [
        [[-0.002, 0.001, 0.0], [0.001, -0.001, 0.0005], [0.0, 0.0005, -0.002]],
        [[0.001, 0.0, 0.0], [0.0, 0.001, 0.0], [0.0, 0.0, 0.001]]]},
    "sigma_pm": {"kind": "polynomial", "coeffs": [
        [[0.001], [-0.0005], [0.0008]], [[-0.0005], [0.00025], [-0.0004]]]},
    "sigma_mp": {"kind": "polynomial", "coeffs": [
        [[0.002, 0.001, -0.0015]], [[0.002, 0.001, -0.0015]]]},
}

# In-domain self-amplification of w+: the uncontrolled loop grows while the
# backstepping loop still clears the domain in finite time.
DESTABILIZING_SIGMA = {
    "sigma_pp": {"kind": "constant", "value": [[0.005, 0.0, 0.0], [0.0, 0.005, 0.0], [0.0, 0.0, 0.005]]},
    "sigma_pm": {"kind": "constant", "value": [[0.0005], [0.0005], [-0.0005]]},
    "sigma_mp": {"kind": "constant", "value": [[0.002, 0.001, -0.0015]]},
}

SIGMA_PRESETS = {"reference": REFERENCE_SIGMA, "destabilizing": DESTABILIZING_SIGMA}

REFERENCE_LAMBDA_MINUS = [-0.02, -0.023, -0.024, -0.025, -0.03]
REFERENCE_INITIAL = [0.02, 0.32, 0.32, 0.32, 0.02]
# Birth-death chain pulling towards the middle states; stationary law
# (1, 10, 10, 10, 1) / 32.
REFERENCE_RATES = [
    [0.0, 0.05, 0.0, 0.0, 0.0],
    [0.005, 0.0, 0.01, 0.0, 0.0],
    [0.0, 0.01, 0.0, 0.01, 0.0],
    [0.0, 0.0, 0.01, 0.0, 0.005],
    [0.0, 0.0, 0.0, 0.05, 0.0],
]

_SHAPES = {"sigma_pp": (3, 3), "sigma_pm": (3, 1), "sigma_mp": (1, 3)}


class ConfigError(ModelError):
    pass


def reference_config(sigma: str = "reference") -> dict:
    nominal = {
        "lambda_plus": [0.0081, 0.0037, 0.0065],
        "lambda_minus": -0.024,
        "q": [-12.29, -3.0, 8.45],
        "r": [0.0011, -0.1601, 0.0034],
        "sigma_pp": sigma, "sigma_pm": sigma, "sigma_mp": sigma,
    }
    return {
        "modes": {"nominal": nominal, "family": [{"lambda_minus": v} for v in REFERENCE_LAMBDA_MINUS]},
        "markov": {"rates": copy.deepcopy(REFERENCE_RATES), "initial_distribution": list(REFERENCE_INITIAL)},
        "grid": {"n_cells": 100, "cfl": 0.9},
        "controller": {"type": "nominal_backstepping", "kernel_tol": 1e-10, "kernel_max_iter": 200,
                       "lyapunov_margin": 0.05, "nu": None},
        "experiment": {"horizon": 400.0, "initial_condition": "sinusoidal", "n_paths": 100,
                       "base_seed": 0, "snapshot_stride": 0, "tail_fraction": 1.0, "dt_ode": None},
    }


def _profile(spec, name: str) -> Profile:
    shape = _SHAPES[name]
    if isinstance(spec, str):
        if spec == "zero":
            return Profile.zeros(*shape)
        if spec not in SIGMA_PRESETS:
            raise ConfigError(f"unknown coupling preset {spec!r}")
        spec = SIGMA_PRESETS[spec][name]
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError(f"{name}: expected a preset name or an object with 'kind'")
    kind = spec["kind"]
    try:
        if kind == "constant":
            prof = Profile.constant(np.array(spec["value"], dtype=float).reshape(shape))
        elif kind == "polynomial":
            prof = Profile.polynomial(np.array(spec["coeffs"], dtype=float).reshape((-1,) + shape))
        elif kind == "sampled":
            prof = Profile.sampled(np.array(spec["values"], dtype=float).reshape((-1,) + shape))
        else:
            raise ConfigError(f"{name}: unknown kind {kind!r}")
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"{name}: {exc}") from exc
    return prof


def mode_from_dict(d: dict) -> Mode:
    try:
        return Mode(
            lambda_plus=np.array(d["lambda_plus"], dtype=float),
            mu_minus=normalize_speed(d["lambda_minus"]),
            sigma_pp=_profile(d.get("sigma_pp", "zero"), "sigma_pp"),
            sigma_pm=_profile(d.get("sigma_pm", "zero"), "sigma_pm"),
            sigma_mp=_profile(d.get("sigma_mp", "zero"), "sigma_mp"),
            q_bound=np.array(d.get("q", [0, 0, 0]), dtype=float),
            r_bound=np.array(d.get("r", [0, 0, 0]), dtype=float),
        )
    except KeyError as exc:
        raise ConfigError(f"mode is missing field {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad mode: {exc}") from exc


@dataclass
class Scenario:
    """A fully resolved configuration."""

    raw: dict
    nominal: Mode
    spec: MarkovSpec
    n_cells: int
    cfl: float

    @property
    def controller(self) -> dict:
        return self.raw["controller"]

    @property
    def experiment(self) -> dict:
        return self.raw["experiment"]

    @property
    def grid(self) -> Grid:
        return Grid.for_modes(self.n_cells, list(self.spec.modes) + [self.nominal], self.cfl)

    def sim_config(self):
        from .pde import SimConfig

        e = self.experiment
        return SimConfig(self.grid, float(e["horizon"]), e.get("initial_condition", "sinusoidal"),
                         self.controller.get("type", "nominal_backstepping"), int(e.get("snapshot_stride", 0)))


def build(raw: dict) -> Scenario:
    """Validate a config tree and resolve it to library objects."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    missing = [s for s in SECTIONS if s not in raw]
    if missing:
        raise ConfigError(f"config is missing sections {missing}")
    unknown = [s for s in raw if s not in SECTIONS]
    if unknown:
        raise ConfigError(f"unknown config sections {unknown}")
    modes = raw["modes"]
    if "nominal" not in modes:
        raise ConfigError("modes.nominal is required")
    nominal = mode_from_dict(modes["nominal"])
    family = modes.get("family") or [{}]
    members = [mode_from_dict({**modes["nominal"], **f}) for f in family]
    mk = raw["markov"]
    r = len(members)
    rates = mk.get("rates", np.zeros((r, r)).tolist())
    p0 = mk.get("initial_distribution")
    if p0 is None:
        raise ConfigError("markov.initial_distribution is required")
    schedule = [(s["t_start"], s["t_end"], s["rates"]) for s in mk.get("schedule", [])]
    spec = MarkovSpec(tuple(members), np.array(rates, dtype=float), np.array(p0, dtype=float), tuple(schedule))
    g = raw["grid"]
    ctrl = raw["controller"]
    if ctrl.get("type", "nominal_backstepping") not in ("nominal_backstepping", "zero_input"):
        raise ConfigError(f"unknown controller type {ctrl.get('type')!r}")
    e = raw["experiment"]
    if not float(e.get("horizon", 0)) > 0:
        raise ConfigError("experiment.horizon must be positive")
    sc = Scenario(raw, nominal, spec, int(g.get("n_cells", 100)), float(g.get("cfl", 0.9)))
    sc.sim_config()  # validates grid and initial condition
    return sc


def load(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc


def dump(raw: dict, path):
    from .io import atomic_writer

    with atomic_writer(path) as fh:
        json.dump(raw, fh, indent=2)
        fh.write("\n")


def apply_override(raw: dict, assignment: str) -> dict:
    """Apply ``dotted.path=value``; integer segments index lists, values parse as JSON when possible."""
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} is not key=value")
    key, text = assignment.split("=", 1)
    try:
        value = json.loads(text)
    except json.JSONDecodeError:
        value = text
    parts = key.strip().split(".")
    node = raw
    for part in parts[:-1]:
        node = node[int(part)] if isinstance(node, list) else node.setdefault(part, {})
    last = parts[-1]
    if isinstance(node, list):
        node[int(last)] = value
    else:
        node[last] = value
    return raw


def scenario_paper_v(sigma: str = "reference"):
    """Built-in reproduction scenario: returns (SimConfig, MarkovSpec, nominal Mode)."""
    sc = build(reference_config(sigma))
    return sc.sim_config(), sc.spec, sc.nominal
