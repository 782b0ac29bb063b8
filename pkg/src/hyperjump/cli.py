"""Command-line entry point: ``hyperjump <subcommand> [--config PATH] [--out DIR] ...``.

Exit status: 0 on success, 1 on validation failure (bad config, failed
checks), 2 on numerical failure (kernel non-convergence, divergence).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .io import atomic_writer, fmt, write_table
from .model import ModelError

log = logging.getLogger("hyperjump")

COMMANDS = ("kernel", "simulate", "kolmogorov", "ensemble", "check", "scenario-v")
KOLMOGOROV_STRIDE = 10


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hyperjump", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON config (default: the built-in scenario)")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="dotted-path override, repeatable (e.g. grid.n_cells=200)")
    p.add_argument("--paths", type=int, help="number of ensemble paths")
    p.add_argument("--seed", type=int, help="base seed; with simulate, sample a single mode path")
    p.add_argument("--grid", type=int, help="spatial cells (also the kernel mesh)")
    p.add_argument("--sigma", default="reference", help="coupling preset for scenario-v")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _raw_config(args) -> dict:
    raw = cfgmod.load(args.config) if args.config else cfgmod.reference_config(args.sigma)
    for o in args.overrides:
        cfgmod.apply_override(raw, o)
    if args.grid is not None:
        raw.setdefault("grid", {})["n_cells"] = args.grid
    if args.paths is not None:
        raw.setdefault("experiment", {})["n_paths"] = args.paths
    if args.seed is not None:
        raw.setdefault("experiment", {})["base_seed"] = args.seed
    return raw


def _write_report(path, items: dict):
    with atomic_writer(path) as fh:
        for k, v in items.items():
            fh.write(f"{k} = {_render(v)}\n")


def _render(v):
    if isinstance(v, (float, int, np.floating, np.integer)) and not isinstance(v, bool):
        return fmt(v)
    if isinstance(v, (list, tuple)):
        return " ".join(_render(e) for e in v)
    return str(v)


def _kernels(sc):
    from .kernel import solve_kernels

    c = sc.controller
    return solve_kernels(sc.nominal, sc.n_cells, float(c.get("kernel_tol", 1e-10)),
                         int(c.get("kernel_max_iter", 200)))


def _diagnostics(sc, ks, params, fitted, out: Path, extra: dict):
    from .lyapunov import diagnostic_report
    from .markov import kolmogorov_forward

    ksol = kolmogorov_forward(sc.spec, float(sc.experiment["horizon"]), sc.experiment.get("dt_ode"))
    d = diagnostic_report(ks, sc.spec, sc.nominal, params, fitted, ksol)
    items = dict(extra)
    items["nu"] = d["nu"]
    items["a"] = d["a"]
    if "zeta" in d:
        items["zeta"], items["varsigma"] = d["zeta"], d["varsigma"]
    for m in d["modes"]:
        items[f"mode{m['mode'] + 1}.distance"] = m["distance"]
        items[f"mode{m['mode'] + 1}.m0"] = m["m0_ratio"]
    for k, v in d["expected_distance"].items():
        items[f"expected_distance.{k}"] = v
    _write_report(out / "report.txt", items)


def cmd_scenario_v(args, raw, out: Path):
    cfgmod.build(raw)
    path = out / "config.json"
    cfgmod.dump(raw, path)
    print(path)


def cmd_kernel(sc, out: Path):
    from .kernel import save_csv

    ks = _kernels(sc)
    save_csv(ks, out / "kernel.csv")
    with atomic_writer(out / "residuals.json") as fh:
        json.dump(ks.residual_report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    r = ks.residuals
    print(f"iterations {ks.iterations}, max interior residual {r.max_interior:.3e}, "
          f"max boundary residual {r.max_boundary:.3e}")


def cmd_kolmogorov(sc, out: Path):
    from .markov import expected_distance_curve, kolmogorov_forward

    ksol = kolmogorov_forward(sc.spec, float(sc.experiment["horizon"]), sc.experiment.get("dt_ode"))
    ksol.to_csv(out / "kolmogorov.csv", KOLMOGOROV_STRIDE)
    curve = expected_distance_curve(sc.spec, ksol, sc.nominal)
    idx = np.arange(0, len(ksol.t_grid), KOLMOGOROV_STRIDE)
    if idx[-1] != len(ksol.t_grid) - 1:
        idx = np.append(idx, len(ksol.t_grid) - 1)
    write_table(out / "expected_distance.csv", ["t", "expected_distance"], [ksol.t_grid[idx], curve[idx]])
    print(f"P(T) = {np.array2string(ksol.p[-1], precision=6)}")


def cmd_simulate(args, sc, out: Path):
    from .checks import lyapunov_params
    from .lyapunov import FitError, decay_fit
    from .markov import ModePath, sample_path
    from .pde import simulate

    cfg = sc.sim_config()
    control = cfg.controller == "nominal_backstepping"
    ks = _kernels(sc) if control else None
    if args.seed is None:
        path, modes = ModePath.constant(0, cfg.horizon), None
    else:
        path, modes = sample_path(sc.spec, cfg.horizon, args.seed), sc.spec.modes
        path.to_csv(out / "mode_path.csv")
    params = lyapunov_params(sc, ks) if control else None
    traj = simulate(cfg, path, sc.nominal, ks, modes=modes, lyap=params)
    traj.write(out)
    try:
        fitted = decay_fit(traj.t_grid, traj.p_series, float(sc.experiment.get("tail_fraction", 1.0)))
    except FitError:
        fitted = (float("nan"), float("nan"))
    items = {"controller": cfg.controller, "n_cells": cfg.grid.n_cells, "dt": cfg.dt,
             "p0": traj.p_series[0], "p_end": traj.p_series[-1]}
    if control:
        _diagnostics(sc, ks, params, fitted, out, items)
    else:
        items["zeta"], items["varsigma"] = fitted
        _write_report(out / "report.txt", items)
    print(f"p(0) = {traj.p_series[0]:.6g}, p(T) = {traj.p_series[-1]:.6g}")


def cmd_ensemble(sc, out: Path):
    from .checks import lyapunov_params
    from .experiment import run_ensemble

    cfg = sc.sim_config()
    ks = _kernels(sc) if cfg.controller == "nominal_backstepping" else None
    e = sc.experiment
    res = run_ensemble(cfg, sc.spec, sc.nominal, ks, int(e.get("n_paths", 100)), int(e.get("base_seed", 0)),
                       out_dir=out, tail_fraction=float(e.get("tail_fraction", 1.0)))
    items = {"n_paths": res.n_paths, "base_seed": int(e.get("base_seed", 0)), "controller": cfg.controller,
             "n_cells": cfg.grid.n_cells, "mean_p0": res.mean_p[0], "mean_p_end": res.mean_p[-1],
             "diverged": list(res.diverged) or "none"}
    if ks is not None:
        _diagnostics(sc, ks, lyapunov_params(sc, ks), res.fitted, out, items)
    else:
        items["zeta"], items["varsigma"] = res.fitted
        _write_report(out / "report.txt", items)
    print(f"fitted zeta = {res.fitted[0]:.6g}, mean_p(T)/mean_p(0) = {res.mean_p[-1] / res.mean_p[0]:.3e}")


def cmd_check(sc, out: Path) -> int:
    from .checks import run_checks

    results = run_checks(sc)
    lines = [c.line() for c in results]
    failed = sum(not c.passed for c in results)
    lines.append(f"{len(results) - failed} passed, {failed} failed")
    with atomic_writer(out / "check.txt") as fh:
        fh.write("\n".join(lines) + "\n")
    print("\n".join(lines))
    return 1 if failed else 0


def main(argv=None) -> int:
    from .experiment import EnsembleError
    from .kernel import KernelConvergenceError, MeshMismatchError
    from .lyapunov import FitError, ParameterSearchError
    from .pde import SimulationDiverged

    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = Path(args.out)
    try:
        raw = _raw_config(args)
        if args.command == "scenario-v":
            cmd_scenario_v(args, raw, out)
            return 0
        sc = cfgmod.build(raw)
    except (ModelError, OSError, KeyError, TypeError, ValueError, IndexError) as exc:
        print(f"hyperjump: invalid configuration: {exc}", file=sys.stderr)
        return 1
    try:
        if args.command == "kernel":
            cmd_kernel(sc, out)
        elif args.command == "kolmogorov":
            cmd_kolmogorov(sc, out)
        elif args.command == "simulate":
            cmd_simulate(args, sc, out)
        elif args.command == "ensemble":
            cmd_ensemble(sc, out)
        elif args.command == "check":
            return cmd_check(sc, out)
    except (KernelConvergenceError, SimulationDiverged, EnsembleError, ParameterSearchError, FitError,
            FloatingPointError) as exc:
        print(f"hyperjump: numerical failure: {exc}", file=sys.stderr)
        return 2
    except (ModelError, MeshMismatchError) as exc:
        print(f"hyperjump: invalid input: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
