import dataclasses

import numpy as np
import pytest

from hyperjump import _accel
from hyperjump.kernel import KernelSolution, MeshMismatchError
from hyperjump.markov import ModePath, sample_path
from hyperjump.model import Grid, Mode, ModelError, Profile
from hyperjump.pde import SimConfig, simulate


def _plain_mode(q=(0, 0, 0), r=(0, 0, 0), mu=0.6):
    return Mode(np.array([0.3, 0.5, 0.7]), mu, q_bound=np.array(q, float), r_bound=np.array(r, float))


def test_zero_initial_condition_stays_zero(ref, ref_kernels):
    cfg, _, nom = ref
    cfg = dataclasses.replace(cfg, initial_condition="zero", horizon=50.0)
    tr = simulate(cfg, ModePath.constant(0, cfg.horizon), nom, ref_kernels)
    assert not tr.p_series.any() and not tr.u_series.any() and not tr.snapshots.any()


def test_pure_transport_exits_domain():
    # unit Courant number on every channel: the scheme is the exact shift
    m = Mode(np.ones(3), 1.0)
    grid = Grid.for_modes(50, [m], cfl=1.0)
    cfg = SimConfig(grid, 3.0, controller="zero_input")
    tr = simulate(cfg, ModePath.constant(0, cfg.horizon), m, None)
    assert tr.p_series[0] > 0
    assert np.all(tr.p_series[tr.t_grid >= 1.0 + cfg.dt] == 0.0)


def test_pure_transport_diffusive_tail():
    # distinct speeds: upwind smearing leaves a tail that dies off geometrically
    m = _plain_mode()
    cfg = SimConfig(Grid.for_modes(50, [m], 0.8), 20.0, controller="zero_input")
    tr = simulate(cfg, ModePath.constant(0, cfg.horizon), m, None)
    t_exit = 1.0 / 0.3
    assert tr.p_series[np.searchsorted(tr.t_grid, 2 * t_exit)] <= 1e-15 * tr.p_series[0]
    assert np.all(np.diff(tr.p_series) <= 0)


def test_upwind_matches_exact_transport_at_unit_courant():
    # with Courant number exactly 1 for w1, the scheme shifts by one cell per step
    m = Mode(np.array([1.0, 0.5, 0.5]), 0.5)
    grid = Grid(40, 1.0, 1.0)
    x = grid.x
    w0 = np.zeros((4, 41))
    w0[0] = np.exp(-100 * (x - 0.3) ** 2)
    cfg = SimConfig(grid, 10 * grid.dt, initial_condition=w0, controller="zero_input", snapshot_stride=10)
    tr = simulate(cfg, ModePath.constant(0, cfg.horizon), m, None)
    shifted = np.concatenate([np.zeros(10), w0[0, :-10]])
    np.testing.assert_allclose(tr.snapshots[-1][0], shifted, atol=1e-14)


def test_max_norm_does_not_grow_open_loop():
    m = _plain_mode(q=(0.5, -0.9, 0.3), r=(0.2, 0.3, -0.4))
    cfg = SimConfig(Grid.for_modes(60, [m], 0.9), 20.0, controller="zero_input", snapshot_stride=1)
    tr = simulate(cfg, ModePath.constant(0, cfg.horizon), m, None)
    mx = np.abs(tr.snapshots).max(axis=(1, 2))
    assert np.all(np.diff(mx) <= 1e-14)


def test_frozen_path_equals_nominal_run(ref, ref_kernels):
    cfg, spec, nom = ref
    cfg = dataclasses.replace(cfg, horizon=40.0)
    a = simulate(cfg, ModePath.constant(2, cfg.horizon), nom, ref_kernels, modes=spec.modes)
    b = simulate(cfg, ModePath.constant(0, cfg.horizon), nom, ref_kernels)
    assert np.array_equal(a.p_series, b.p_series)


def test_boundary_cancellation(ref, ref_kernels):
    cfg, _, nom = ref
    from hyperjump.lyapunov import LyapunovParams

    cfg = dataclasses.replace(cfg, horizon=100.0)
    tr = simulate(cfg, ModePath.constant(0, cfg.horizon), nom, ref_kernels, lyap=LyapunovParams(1e-3, 250.0))
    assert np.all(np.abs(tr.beta1_series[1:]) <= 1e-12 * tr.theta_max_series[1:])


def test_last_stamp_on_horizon(ref):
    cfg, _, _ = ref
    assert cfg.n_steps * cfg.dt == pytest.approx(cfg.horizon, rel=1e-15)
    assert cfg.dt <= cfg.grid.dt


def test_kernel_required_and_grid_checked(ref):
    cfg, _, nom = ref
    with pytest.raises(ModelError):
        simulate(cfg, ModePath.constant(0, cfg.horizon), nom, None)
    with pytest.raises(MeshMismatchError):
        simulate(cfg, ModePath.constant(0, cfg.horizon), nom, KernelSolution.zeros(20))


def test_cfl_violation_rejected():
    slow, fast = _plain_mode(mu=0.6), _plain_mode(mu=5.0)
    cfg = SimConfig(Grid.for_modes(20, [slow], 0.9), 1.0, controller="zero_input")
    with pytest.raises(ModelError):
        simulate(cfg, ModePath.constant(1, 1.0), slow, None, modes=[slow, fast])


def test_divergence_detected():
    from hyperjump.pde import SimulationDiverged

    m = Mode(np.array([0.3, 0.5, 0.7]), 0.6, sigma_pp=Profile.constant(np.eye(3) * 1e3))
    cfg = SimConfig(Grid.for_modes(20, [m], 0.9), 200.0, controller="zero_input")
    with pytest.raises(SimulationDiverged):
        simulate(cfg, ModePath.constant(0, cfg.horizon), m, None)


@pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba not installed")
def test_numba_and_numpy_steppers_agree(ref, ref_kernels):
    cfg, spec, nom = ref
    from hyperjump.lyapunov import LyapunovParams

    cfg = dataclasses.replace(cfg, horizon=60.0)
    path = sample_path(spec, cfg.horizon, 11)
    kw = dict(modes=spec.modes, lyap=LyapunovParams(1e-3, 250.0))
    a = simulate(cfg, path, nom, ref_kernels, use_numba=True, **kw)
    b = simulate(cfg, path, nom, ref_kernels, use_numba=False, **kw)
    for f in ("p_series", "u_series", "v_series", "snapshots"):
        np.testing.assert_allclose(getattr(a, f), getattr(b, f), rtol=1e-11, atol=1e-14)


def test_write_outputs(tmp_path, ref, ref_kernels):
    cfg, _, nom = ref
    cfg = dataclasses.replace(cfg, horizon=10.0, snapshot_stride=10)
    tr = simulate(cfg, ModePath.constant(0, cfg.horizon), nom, ref_kernels)
    tr.write(tmp_path)
    names = sorted(p.name for p in tmp_path.iterdir())
    assert "series.csv" in names and sum(n.startswith("snapshot_") for n in names) == len(tr.snapshot_times)
