import numpy as np
import pytest
from scipy.linalg import expm

from hyperjump.markov import ModePath, expected_distance, kolmogorov_forward, sample_path
from hyperjump.model import MarkovSpec, Mode, ModelError


def _modes(r):
    return tuple(Mode(np.ones(3), 1.0 + 0.1 * j) for j in range(r))


def _two_state(p0=(1.0, 0.0)):
    return MarkovSpec(_modes(2), np.array([[0.0, 1.0], [2.0, 0.0]]), np.array(p0))


def test_no_transitions_keeps_distribution():
    spec = MarkovSpec(_modes(3), np.zeros((3, 3)), np.array([0.2, 0.5, 0.3]))
    k = kolmogorov_forward(spec, 10.0)
    assert np.array_equal(k.p, np.tile([0.2, 0.5, 0.3], (len(k.t_grid), 1)))


def test_point_mass_at_start():
    k = kolmogorov_forward(_two_state(), 1.0)
    assert np.array_equal(k.p[0], [1.0, 0.0])


def test_two_state_stationary_matches_eigenvector():
    spec = _two_state()
    g = spec.generator()
    vals, vecs = np.linalg.eig(g.T)
    v = np.real(vecs[:, np.argmin(np.abs(vals))])
    oracle = v / v.sum()
    np.testing.assert_allclose(oracle, [2 / 3, 1 / 3], atol=1e-14)
    k = kolmogorov_forward(spec, 30.0)
    np.testing.assert_allclose(k.p[-1], oracle, atol=1e-8)


def test_chapman_kolmogorov_three_state():
    rates = np.array([[0, 0.3, 0.1], [0.2, 0, 0.5], [0.4, 0.1, 0.0]])
    spec = MarkovSpec(_modes(3), rates, np.array([0.1, 0.6, 0.3]))
    g = spec.generator()
    k = kolmogorov_forward(spec, 6.0, dt_ode=0.01)
    for t in (1.0, 2.5, 6.0):
        np.testing.assert_allclose(k.at(t), spec.initial_distribution @ expm(g * t), atol=1e-10)
    # P(0, s + t) = P(0, s) P(s, s + t)
    np.testing.assert_allclose(k.at(6.0), k.at(2.5) @ expm(g * 3.5), atol=1e-10)


def test_probability_conserved_reference(ref):
    cfg, spec, _ = ref
    k = kolmogorov_forward(spec, cfg.horizon)
    assert np.abs(k.p.sum(axis=1) - 1).max() <= 1e-10
    assert k.p.min() >= -1e-15


def test_piecewise_rates():
    spec = MarkovSpec(_modes(2), np.zeros((2, 2)), np.array([1.0, 0.0]),
                      ((1.0, 2.0, np.array([[0, 1.0], [0, 0]])),))
    k = kolmogorov_forward(spec, 3.0, dt_ode=0.001)
    assert k.at(1.0)[0] == pytest.approx(1.0, abs=1e-12)
    assert k.at(3.0)[0] == pytest.approx(np.exp(-1.0), abs=1e-9)


def test_absorbing_path():
    spec = MarkovSpec(_modes(4), np.zeros((4, 4)), np.array([0, 0, 1.0, 0]))
    p = sample_path(spec, 50.0, seed=1)
    assert p.times.tolist() == [0.0] and p.modes.tolist() == [2]


def test_seed_determinism():
    spec = _two_state((0.5, 0.5))
    a, b = sample_path(spec, 100.0, 7), sample_path(spec, 100.0, 7)
    assert np.array_equal(a.times, b.times) and np.array_equal(a.modes, b.modes)
    c = sample_path(spec, 100.0, 8)
    assert not (len(a.times) == len(c.times) and np.array_equal(a.times, c.times))


def test_sampled_occupancy_matches_kolmogorov():
    spec = _two_state()
    n = 10_000
    paths = [sample_path(spec, 5.0, s) for s in range(n)]
    k = kolmogorov_forward(spec, 5.0)
    p1 = k.at(5.0)[0]
    emp = np.mean([p.mode_at(5.0 - 1e-12) == 0 for p in paths])
    assert abs(emp - p1) <= 3 * np.sqrt(p1 * (1 - p1) / n)


def test_time_varying_sampling_matches_kolmogorov():
    rates = np.array([[0, 0.5], [1.0, 0]])
    spec = MarkovSpec(_modes(2), rates, np.array([1.0, 0.0]), ((2.0, 4.0, np.zeros((2, 2))),))
    n = 5000
    paths = [sample_path(spec, 6.0, s) for s in range(n)]
    k = kolmogorov_forward(spec, 6.0, dt_ode=0.001)
    for t in (1.0, 3.0, 5.5):
        p1 = k.at(t)[0]
        emp = np.mean([p.mode_at(t) == 0 for p in paths])
        assert abs(emp - p1) <= 3 * np.sqrt(p1 * (1 - p1) / n)


def test_mode_path_on_steps_quantizes_upward():
    p = ModePath(np.array([0.0, 0.25]), np.array([0, 1]), 1.0)
    np.testing.assert_array_equal(p.on_steps(0.1, 5), [0, 0, 0, 1, 1, 1])


def test_expected_distance(ref):
    _, spec, nom = ref
    k = kolmogorov_forward(spec, 1.0)
    assert expected_distance(spec, k, nom, 0.0) == pytest.approx(8.4e-4, abs=1e-15)
    frozen = MarkovSpec(spec.modes, np.zeros((5, 5)), np.array([0, 0, 1.0, 0, 0]))
    kf = kolmogorov_forward(frozen, 10.0)
    assert expected_distance(frozen, kf, nom, 7.3) == 0.0


def test_bad_horizon():
    with pytest.raises(ModelError):
        kolmogorov_forward(_two_state(), 0.0)
