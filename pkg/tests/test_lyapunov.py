import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hyperjump.kernel import KernelSolution, solve_kernels
from hyperjump.lyapunov import (FitError, LyapunovParams, choose_params, decay_fit, evaluate_V,
                                lemma3_ratio, min_weight_a, perturbation_functions, step_monotonicity,
                                weight_bounds)
from hyperjump.markov import ModePath
from hyperjump.model import FieldState, MarkovSpec, Mode, ModelError, Profile, mode_distance
from hyperjump.pde import simulate
from hyperjump.transform import apply_transform, trapezoid_weights

from conftest import REF_Q, constant_mode


def test_params_invariant():
    with pytest.raises(ModelError):
        LyapunovParams(0.1, 0.0)
    with pytest.raises(ModelError):
        LyapunovParams(-1.0, 1.0)


def test_v_examples():
    m = Mode(np.array([2.0, 1.0, 1.0]), 1.0)
    ks = KernelSolution.zeros(10)
    p = LyapunovParams(0.0, 1.0)
    assert evaluate_V(FieldState(np.zeros((4, 11))), ks, m, p) == 0.0
    w = np.zeros((4, 11))
    w[0] = 1.0
    assert evaluate_V(FieldState(w), ks, m, p) == pytest.approx(0.5, rel=1e-14)


def test_v_norm_equivalence(ref, ref_kernels):
    _, spec, nom = ref
    p = LyapunovParams(0.05, 250.0)
    x = ref_kernels.x
    rng = np.random.default_rng(0)
    wts = trapezoid_weights(100)
    for j in range(100):
        mode = spec.modes[j % 5]
        k1, k2 = weight_bounds(mode, p, x)
        s = FieldState(rng.normal(size=(4, 101)))
        th = apply_transform(ref_kernels, s).theta
        norm2 = wts @ (th**2).sum(axis=0)
        v = evaluate_V(s, ref_kernels, mode, p)
        assert k1 * norm2 <= v * (1 + 1e-12) and v <= k2 * norm2 * (1 + 1e-12)


def test_decay_fit_exact():
    t = np.linspace(0, 20, 201)
    assert decay_fit(t, np.exp(-0.5 * t))[0] == pytest.approx(0.5, abs=1e-10)
    rate, amp = decay_fit(t, 3 * np.exp(-0.5 * t), 1.0)
    assert rate == pytest.approx(0.5, abs=1e-10)
    # amplitude is normalized by series(0)
    assert amp * 3 == pytest.approx(3.0, abs=1e-10)


def test_decay_fit_errors():
    t = np.linspace(0, 1, 11)
    with pytest.raises(FitError):
        decay_fit(t, np.zeros(11))
    with pytest.raises(FitError):
        decay_fit(t, np.ones(11), tail_fraction=0.0)


def test_min_weight_a_reference_values(ref):
    _, spec, nom = ref
    assert float(REF_Q @ REF_Q) == pytest.approx(231.4466, abs=1e-10)
    assert min_weight_a(spec.modes, nom, 0.05) >= 231.4466 * 1.05 - 1e-10


def test_min_weight_a_zero_q():
    m = Mode(np.ones(3), 1.0)
    assert min_weight_a([m], m, 0.1) == pytest.approx(0.1)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-20, 20), min_size=3, max_size=3), st.floats(1e-3, 2.0))
def test_min_weight_a_admissible(q, margin):
    m = Mode(np.ones(3), 1.0, q_bound=np.array(q))
    p = LyapunovParams(0.1, min_weight_a([m], m, margin))
    assert p.admissible_for([m])


def test_choose_params_reference(ref, ref_kernels):
    cfg, spec, nom = ref
    p = choose_params(spec, nom, 0.05, ks=ref_kernels)
    assert p.a >= 231.4466 * 1.05 - 1e-9 and p.admissible_for(spec.modes)
    tr = simulate(cfg, ModePath.constant(0, cfg.horizon), nom, ref_kernels, lyap=p)
    assert decay_fit(tr.t_grid, tr.v_series)[0] > 0
    # stepwise decay after one transport period, with a scheme-level tolerance
    t_start = 1.0 / nom.lambda_plus.min()
    spp = nom.sigmas(ref_kernels.x)[0]
    eps = 10 * cfg.dt * (p.nu + 2 * np.linalg.norm(spp, 2, axis=(1, 2)).max())
    assert step_monotonicity(tr.t_grid, tr.v_series, t_start, eps) <= eps


def test_f_vanish_at_nominal(ref, ref_kernels):
    _, _, nom = ref
    ks = ref_kernels
    pf = perturbation_functions(ks, nom, nom)
    r = ks.residuals
    assert np.abs(pf.f1).max() <= 1e-12 and np.abs(pf.f2).max() <= 1e-12
    # interior f's are the interior kernel residuals themselves
    assert np.abs(pf.f3).max() == r.max_interior_k
    assert np.abs(pf.f4).max() == r.max_interior_n
    assert lemma3_ratio(pf, 0.0, floor=10 * r.max_interior) == 0.0
    assert lemma3_ratio(pf, 0.0) == float("inf")


def test_f1_constant_kernel_formula():
    nom = constant_mode()
    ks = solve_kernels(nom, 30)
    other = nom.with_(mu_minus=0.5)
    pf = perturbation_functions(ks, other, nom)
    kd = np.array([np.diagonal(ks.k[c]) for c in range(3)])
    np.testing.assert_allclose(pf.f1, (other.mu_minus - nom.mu_minus) * kd, atol=1e-15)


def test_zero_sigma_zero_kernel_f_vanish():
    nom = Mode(np.array([0.0081, 0.0037, 0.0065]), 0.024, q_bound=REF_Q)
    ks = solve_kernels(nom, 20)
    pf = perturbation_functions(ks, nom.with_(mu_minus=0.02), nom)
    assert not np.any(pf.sup_norms())


def _tractable_pair():
    nom = constant_mode(q=(0, 0, 0))
    target = Mode(np.array([0.3, 0.5, 0.7]), 0.5,
                  sigma_pp=Profile.constant(0.01 * np.eye(3)),
                  sigma_pm=Profile.constant([[0.01], [0.0], [-0.02]]),
                  sigma_mp=Profile.constant([[0.025, -0.01, 0.01]]),
                  q_bound=np.array([0.2, -0.1, 0.3]), r_bound=np.array([0.1, 0.0, 0.0]))
    return nom, target


def test_lemma3_linear_scaling_tractable():
    nom, target = _tractable_pair()
    ks = solve_kernels(nom, 40)
    sups = {s: perturbation_functions(ks, nom.blend(target, s), nom).sup_norms() for s in (0.25, 0.5, 1.0)}
    for s in (0.25, 0.5):
        np.testing.assert_allclose(sups[s], s * sups[1.0], rtol=0.05)


def test_lemma3_ratio_invariant_under_gap_doubling():
    nom = constant_mode()
    ks = solve_kernels(nom, 20)
    a = nom.with_(mu_minus=0.7, q_bound=np.array([0.1, 0.2, 0.0]))
    b = nom.with_(mu_minus=0.8, q_bound=np.array([0.2, 0.4, 0.0]))
    ra = lemma3_ratio(perturbation_functions(ks, a, nom), mode_distance(a, nom))
    rb = lemma3_ratio(perturbation_functions(ks, b, nom), mode_distance(b, nom))
    assert ra > 0 and ra == pytest.approx(rb, rel=0.05)


def test_reference_ratios_comparable(ref, ref_kernels):
    _, spec, nom = ref
    ratios = [lemma3_ratio(perturbation_functions(ref_kernels, m, nom), mode_distance(m, nom))
              for m in spec.modes if mode_distance(m, nom) > 0]
    assert len(ratios) == 4 and np.all(np.isfinite(ratios))
    assert max(ratios) <= 3 * min(ratios)
