import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from dualwave import transform
from dualwave.transform import TransformError, f, f_inverse, f_prime, f_second

# Oracle values.  f^{-1}(1) = int_0^1 sqrt(1+2s^2) ds by adaptive quadrature;
# f(1) by root-finding on that quadrature; f'(1) = 1/sqrt(1+2 f(1)^2).
F_INV_1 = 1.2712738985228156
F_1 = 0.8344247414832793
FP_1 = 0.6465042253230773


def _quad_F(u):
    val, _ = integrate.quad(lambda s: math.sqrt(1.0 + 2.0 * s * s), 0.0, u, epsabs=1e-16, epsrel=1e-13)
    return val


def test_oracle_values_are_independent():
    assert _quad_F(1.0) == pytest.approx(F_INV_1, rel=1e-13)
    from scipy.optimize import brentq

    root = brentq(lambda u: _quad_F(u) - 1.0, 0.5, 1.0, xtol=1e-16, rtol=1e-15)
    assert root == pytest.approx(F_1, rel=1e-13)
    assert 1.0 / math.sqrt(1.0 + 2.0 * root**2) == pytest.approx(FP_1, rel=1e-13)


def test_point_values():
    assert f(0.0) == 0.0
    assert f_inverse(0.0) == 0.0
    assert f_prime(0.0) == 1.0
    assert f_second(0.0) == 0.0
    assert f(1.0) == pytest.approx(F_1, rel=1e-14)
    assert f_inverse(1.0) == pytest.approx(F_INV_1, rel=1e-14)
    assert f_prime(1.0) == pytest.approx(FP_1, rel=1e-14)


def test_asymptotics():
    assert f_inverse(1e6) / 1e12 == pytest.approx(1.0 / math.sqrt(2.0), rel=1e-6)
    assert f(1e8) / (2**0.25 * 1e4) == pytest.approx(1.0, rel=1e-3)


def test_f_second_matches_difference_of_f_prime():
    h = 1e-5
    for t in (0.5, 1.0, 5.0):
        fd = (f_prime(t + h) - f_prime(t - h)) / (2 * h)
        assert abs(f_second(t) - fd) <= 1e-6


def test_f_second_bounded_with_interior_maximum():
    t = np.logspace(-8, 8, 1_000_000)
    vals = np.abs(f_second(t))
    assert np.all(np.isfinite(vals))
    i = int(np.argmax(vals))
    assert 0.1 < t[i] < 10.0


def test_kappa_and_c_lambda():
    assert transform.DEFAULT.kappa == pytest.approx(F_1, rel=1e-14)
    assert transform.DEFAULT.c_lambda(2.0) == 4.0
    assert transform.DEFAULT.c_lambda(0.5) == 0.5
    with pytest.raises(ValueError):
        transform.DEFAULT.c_lambda(0.0)


def test_nonfinite_input_rejected():
    with pytest.raises(TransformError):
        f(np.array([1.0, np.nan]))


def test_transform_bounds_small_sample_estimates():
    t = np.logspace(-8, 8, 20_001)
    rep = transform.verify_transform_bounds(np.concatenate([-t, t]))
    assert rep.passed, rep.lines()
    assert rep.estimates["kappa_hat"] == pytest.approx(F_1, rel=1e-9)
    assert rep.estimates["C_lambda_hat"] == pytest.approx(4.0, rel=1e-6)


def test_derivative_ratio_bounds_at_specific_points():
    rep = transform.verify_transform_bounds(np.array([1e-6, 1.0, 1e6]))
    assert rep["f/2<=f't"].worst_slack >= 0.0
    assert rep["f't<=f"].worst_slack >= -1e-15


def test_transfer_inequality_examples():
    s = np.array([-50.0, -2.0, -0.5, 0.0, 0.5, 2.0, 50.0])
    rep = transform.verify_transfer_inequality(lambda t: t**5 + 6 * t, s)
    assert rep.passed and rep["transfer"].worst_slack >= 0.0
    rng = np.random.default_rng(3)
    rep = transform.verify_transfer_inequality(lambda t: t, rng.uniform(-100, 100, 10_000))
    assert rep.passed


def test_transfer_inequality_not_applicable_without_sign_condition():
    rep = transform.verify_transfer_inequality(lambda t: -t, np.array([1.0, 2.0]))
    assert not rep["transfer"].applicable


@settings(max_examples=300, deadline=None)
@given(st.floats(min_value=-1e12, max_value=1e12, allow_nan=False))
def test_odd_and_round_trip(t):
    assert f(-t) == -f(t)
    back = f_inverse(f(t))
    assert abs(back - t) <= 1e-12 * max(1.0, abs(t))


@settings(max_examples=300, deadline=None)
@given(st.floats(min_value=-1e8, max_value=1e8, allow_nan=False),
       st.floats(min_value=1e-9, max_value=1e3, allow_nan=False))
def test_strictly_increasing(t, dt):
    a, b = t, t + dt * max(1.0, abs(t))
    if b > a:
        assert f(a) < f(b)


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=1e-8, max_value=1e8, allow_nan=False))
def test_derivative_bounds(t):
    fp = f_prime(t)
    assert 0.0 < fp <= 1.0
    assert abs(f(t)) <= t
