import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cthrv.errors import DegenerateDynamicsError, ValidationError
from cthrv.model import (ModelParams, Stability, StateMatrices, VehicleState, acceleration,
                         build_state_matrices, params_from_matrices, stability_index,
                         stability_index_from_partials, string_stability)

THETA = ModelParams(0.08, 0.12, 1.5)

k1s = st.floats(1e-3, 2.0)
k2s = st.one_of(st.just(0.0), st.floats(1e-6, 2.0))
taus = st.floats(0.1, 3.0)
dts = st.floats(1e-3, 1.0)


@pytest.mark.parametrize("s, v, dv, expected", [
    (36.6, 24.4, 0.0, 0.0),
    (62.5, 24.4, 0.0, 2.072),
    (36.6, 24.4, -2.0, -0.24),
])
def test_acceleration_examples(s, v, dv, expected):
    assert acceleration(THETA, s, v, dv) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("k1, k2, tau", [(0.0, 0.1, 1.0), (-0.1, 0.1, 1.0), (0.1, -0.01, 1.0),
                                         (0.1, 0.1, 0.0), (0.1, 0.1, float("nan"))])
def test_params_reject_invalid(k1, k2, tau):
    with pytest.raises(ValidationError):
        ModelParams(k1, k2, tau)


def test_vehicle_state_invariants():
    VehicleState(v=0.0, s=1.0)
    with pytest.raises(ValidationError):
        VehicleState(v=1.0, s=0.0)
    with pytest.raises(ValidationError):
        VehicleState(v=-1.0, s=1.0)


def test_build_state_matrices_example():
    m = build_state_matrices(THETA, 0.1)
    np.testing.assert_allclose(m.a, [[0.976, 0.008], [-0.1, 1.0]], atol=1e-15)
    np.testing.assert_allclose(m.b, [[0.012], [0.1]], atol=1e-15)


def test_build_state_matrices_zero_gain():
    m = build_state_matrices(ModelParams.unchecked(0.0, 0.0, 1.5), 0.1)
    np.testing.assert_array_equal(m.a, [[1.0, 0.0], [-0.1, 1.0]])
    np.testing.assert_array_equal(m.b, [[0.0], [0.1]])


@given(k1s, k2s, taus)
def test_structural_entries(k1, k2, tau):
    m = build_state_matrices(ModelParams(k1, k2, tau), 0.1)
    assert m.a[1, 1] == 1.0 and m.a[1, 0] == -0.1 and m.b[1, 0] == 0.1


def test_build_rejects_bad_dt():
    for dt in (0.0, -0.1):
        with pytest.raises(ValidationError):
            build_state_matrices(THETA, dt)


def test_state_matrices_enforce_second_row():
    with pytest.raises(ValidationError):
        StateMatrices([[0.9, 0.01], [-0.2, 1.0]], [[0.01], [0.1]], 0.1)


def test_params_from_matrices_example():
    m = StateMatrices([[0.976, 0.008], [-0.1, 1.0]], [[0.012], [0.1]], 0.1)
    p = params_from_matrices(m)
    np.testing.assert_allclose(p.as_array(), [0.08, 0.12, 1.5], rtol=1e-12)


def test_params_from_matrices_roundtrip_real_data_values():
    theta = ModelParams(0.0227, 0.194, 1.227)
    p = params_from_matrices(build_state_matrices(theta, 0.1))
    np.testing.assert_allclose(p.as_array(), theta.as_array(), rtol=1e-12)


def test_params_from_matrices_degenerate():
    m = StateMatrices.from_free_entries(0.98, 0.0, 0.01, 0.1)
    with pytest.raises(DegenerateDynamicsError):
        params_from_matrices(m)


@settings(max_examples=500)
@given(st.floats(0.01, 2.0), k2s, st.floats(0.5, 3.0), st.floats(0.05, 1.0))
def test_roundtrip_property(k1, k2, tau, dt):
    theta = ModelParams(k1, k2, tau)
    p = params_from_matrices(build_state_matrices(theta, dt))
    np.testing.assert_allclose(p.as_array(), theta.as_array(), rtol=1e-12, atol=0)


@settings(max_examples=500)
@given(k1s, k2s, taus, dts)
def test_roundtrip_conditioning_bound(k1, k2, tau, dt):
    # a11 = 1 - (k1*tau + k2)*dt is stored to ~eps absolute, so recovering
    # tau loses about eps / (k1*tau*dt) relative accuracy
    theta = ModelParams(k1, k2, tau)
    p = params_from_matrices(build_state_matrices(theta, dt))
    eps = np.finfo(float).eps
    assert abs(p.k1 - k1) <= 4 * eps * k1
    assert abs(p.k2 - k2) <= 4 * eps * k2
    assert abs(p.tau - tau) / tau <= 8 * eps * (1 + (k1 * tau + k2) * dt) / (k1 * tau * dt)


@given(k1s, k2s, taus, st.floats(0.0, 60.0))
def test_equilibrium_is_fixed_point(k1, k2, tau, v):
    theta = ModelParams(k1, k2, tau)
    assert acceleration(theta, tau * v, v, 0.0) == 0.0


@given(k1s, k2s, taus, st.floats(1, 100), st.floats(0, 40), st.floats(-10, 10))
def test_partials_by_central_differences(k1, k2, tau, s, v, dv):
    theta = ModelParams(k1, k2, tau)
    h = 1e-3

    def fd(i):
        x = np.array([s, v, dv])
        e = np.zeros(3)
        e[i] = h
        return (acceleration(theta, *(x + e)) - acceleration(theta, *(x - e))) / (2 * h)

    scale = 1.0 + abs(s) + abs(v) + abs(dv)
    assert fd(0) == pytest.approx(k1, abs=1e-8 * scale)
    assert fd(1) == pytest.approx(-k1 * tau, abs=1e-8 * scale)
    assert fd(2) == pytest.approx(k2, abs=1e-8 * scale)


@pytest.mark.parametrize("theta, lam, cls", [
    ((0.08, 0.12, 1.5), 2.7037037037037, Stability.UNSTABLE),
    ((0.5, 0.5, 2.0), -0.25, Stability.STABLE),
    ((0.5, 0.75, 1.0), 0.0, Stability.MARGINAL),
])
def test_string_stability_examples(theta, lam, cls):
    verdict = string_stability(ModelParams(*theta))
    assert verdict.lam == pytest.approx(lam, abs=1e-12)
    assert verdict.classification is cls


def test_stability_rejects_singular():
    with pytest.raises(ValidationError):
        stability_index(0.0, 0.1, 1.0)
    with pytest.raises(ValidationError):
        stability_index(0.1, 0.1, 0.0)


@settings(max_examples=300)
@given(k1s, k2s, taus)
def test_closed_form_matches_partial_derivative_form(k1, k2, tau):
    lam = stability_index(k1, k2, tau)
    ref = stability_index_from_partials(k1, -k1 * tau, k2)
    assert lam == pytest.approx(ref, rel=1e-12, abs=1e-300)
    # simplified sign form: unstable iff k1*tau^2/2 + k2*tau < 1
    simple = -(k1 * tau ** 2 / 2 + k2 * tau - 1) / (k1 * tau ** 3)
    assert lam == pytest.approx(simple, rel=1e-9, abs=1e-12)
    assert np.sign(lam) == np.sign(simple) or abs(simple) < 1e-12


def test_stability_index_vectorized():
    k1 = np.array([0.08, 0.5, 0.5])
    lam = stability_index(k1, np.array([0.12, 0.5, 0.75]), np.array([1.5, 2.0, 1.0]))
    np.testing.assert_allclose(lam, [2.7037037037037, -0.25, 0.0], atol=1e-12)
