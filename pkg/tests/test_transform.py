import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hyperjump.kernel import KernelSolution, MeshMismatchError
from hyperjump.model import FieldState, Mode
from hyperjump.transform import (TargetState, apply_inverse, apply_transform, control_input,
                                 trapezoid_weights)

from conftest import REF_LAMBDA, REF_R


def _smooth(n, rng):
    x = np.linspace(0.0, 1.0, n + 1)
    a = rng.normal(size=(4, 4))
    return np.array([a[k, 0] + a[k, 1] * np.sin(np.pi * (k + 1) * x) + a[k, 2] * np.cos(2 * x) + a[k, 3] * x**2
                     for k in range(4)])


def test_trapezoid_weights_integrate_linear_exactly():
    w = trapezoid_weights(7)
    x = np.linspace(0, 1, 8)
    assert w @ (3 * x + 1) == pytest.approx(2.5, rel=1e-15)


def test_zero_kernel_is_identity():
    ks = KernelSolution.zeros(20)
    w = _smooth(20, np.random.default_rng(0))
    assert np.array_equal(apply_transform(ks, FieldState(w)).theta, w)
    assert np.array_equal(apply_inverse(ks, TargetState(w)).w, w)


def test_zero_field_maps_to_zero(ref_kernels):
    z = np.zeros((4, 101))
    assert not apply_transform(ref_kernels, FieldState(z)).theta.any()
    assert not apply_inverse(ref_kernels, TargetState(z)).w.any()


def test_constant_n_kernel_closed_form():
    M, c = 50, 0.7
    ks = KernelSolution(np.zeros((3, M + 1, M + 1)), np.tril(np.full((M + 1, M + 1), c)))
    w = np.zeros((4, M + 1))
    w[3] = 1.0
    beta = apply_transform(ks, FieldState(w)).beta
    x = np.linspace(0, 1, M + 1)
    np.testing.assert_allclose(beta, 1 - c * x, atol=1e-14)


def test_round_trip_reference_kernels(ref_kernels):
    rng = np.random.default_rng(3)
    for _ in range(5):
        w = _smooth(100, rng)
        back = apply_inverse(ref_kernels, apply_transform(ref_kernels, FieldState(w))).w
        assert np.abs(back - w).max() <= 1e-8 * np.abs(w).max()


@settings(max_examples=25, deadline=None)
@given(st.integers(8, 40), st.floats(-3, 3), st.integers(0, 2**31 - 1))
def test_round_trip_random_kernels(m, scale, seed):
    rng = np.random.default_rng(seed)
    ks = KernelSolution(np.tril(scale * rng.normal(size=(3, m + 1, m + 1))),
                        np.tril(scale * rng.normal(size=(m + 1, m + 1))))
    w = rng.normal(size=(4, m + 1))
    back = apply_inverse(ks, apply_transform(ks, FieldState(w))).w
    assert np.abs(back - w).max() <= 1e-9 * max(1.0, np.abs(w).max())


def test_grid_mismatch():
    with pytest.raises(MeshMismatchError):
        apply_transform(KernelSolution.zeros(10), FieldState(np.zeros((4, 21))))


def test_control_input_examples():
    nominal = Mode(REF_LAMBDA, 0.024, r_bound=REF_R)
    ks = KernelSolution.zeros(10)
    assert control_input(ks, nominal, FieldState(np.zeros((4, 11)))) == 0.0
    w = np.zeros((4, 11))
    w[:3, -1] = 1.0
    assert control_input(ks, nominal, FieldState(w)) == pytest.approx(0.1556, abs=1e-15)


def test_control_zeroes_target_boundary(ref, ref_kernels):
    _, _, nom = ref
    ks = ref_kernels
    w = _smooth(100, np.random.default_rng(5))
    # impose the plant boundary w-(1) = R0 w+(1) + U; U depends on w-(1) itself through N(1, 1)
    w[3, -1] = 0.0
    u0 = control_input(ks, nom, FieldState(w))
    n11 = ks.n[-1, -1] * trapezoid_weights(100)[-1]
    w[3, -1] = (nom.r_bound @ w[:3, -1] + u0) / (1 - n11)
    beta1 = apply_transform(ks, FieldState(w)).beta[-1]
    assert abs(beta1) <= 1e-12 * np.abs(w).max()
