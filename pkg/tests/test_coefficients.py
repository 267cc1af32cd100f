import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bdftf.timeint import ratio_filter_weights, variable_step_coefficients

ratio = st.floats(0.2, 5.0)


def lagrange_derivative_weights(times):
    """Weights ``w_j`` with ``p'(t_0) = sum w_j p(t_j)`` for the interpolant through ``times``."""
    t = np.asarray(times, dtype=float)
    w = np.zeros(len(t))
    for j in range(len(t)):
        others = [m for m in range(len(t)) if m != j]
        denom = np.prod([t[j] - t[m] for m in others])
        if j == 0:
            w[j] = sum(1.0 / (t[0] - t[m]) for m in others)
        else:
            w[j] = np.prod([t[0] - t[m] for m in others if m != 0]) / denom
    return w


def nodes(a, b, k=1.0):
    # newest first: t_{n+1}, t_n, t_{n-1}, t_{n-2}
    k_n = k
    k_new, k_prev = a * k_n, k_n / b
    return [k_n + k_new, k_n, 0.0, -k_prev]


def test_constant_step_values():
    c = variable_step_coefficients(1.0, 1.0)
    assert np.allclose(c.sigma, (1, 2, 1), atol=1e-14)
    assert np.allclose(c.beta, (1 / 3, 7 / 6, 11 / 6), atol=1e-14)
    assert np.allclose(c.gamma, (2 / 9, 4 / 9, 2 / 9), atol=1e-14)
    assert abs(c.alpha + 2 / 11) < 1e-14


def test_constant_step_combination_is_bdf3():
    b1, b2, b3 = variable_step_coefficients(1.0, 1.0).beta
    # b3 (u' - u0) - b2 (u0 - u1) + b1 (u1 - u2) in monomial weights
    weights = np.array([b3, -b3 - b2, b2 + b1, -b1])
    assert np.allclose(weights * 6, [11, -18, 9, -2], atol=1e-13)


def test_constant_step_filter_stencil():
    w = ratio_filter_weights(1.0, 1.0)
    expected = np.array([1, 0, 0, 0]) - 2 / 11 * np.array([1, -3, 3, -1])
    assert np.allclose(w, expected, atol=1e-14)


@pytest.mark.parametrize("bad", [0.0, -1.0, math.inf, math.nan])
def test_rejects_invalid_ratio(bad):
    with pytest.raises(ValueError):
        variable_step_coefficients(bad, 1.0)
    with pytest.raises(ValueError):
        variable_step_coefficients(1.0, bad)


@given(ratio, ratio)
def test_beta_form_is_scaled_variable_bdf3(a, b):
    t = nodes(a, b)
    k_new = t[0] - t[1]
    w = lagrange_derivative_weights(t) * k_new
    b1, b2, b3 = variable_step_coefficients(a, b).beta
    beta_form = np.array([b3, -b3 - b2, b2 + b1, -b1])
    assert np.allclose(beta_form, w, rtol=1e-9, atol=1e-9)


@given(ratio, ratio)
def test_sigma_is_quadratic_extrapolation(a, b):
    t = nodes(a, b)
    s1, s2, s3 = variable_step_coefficients(a, b).sigma
    for poly in ([1.0], [1.0, 0.0], [1.0, 0.0, 0.0], [0.3, -1.2, 2.0]):
        v = np.polyval(poly, t)
        extrap = s3 * v[1] + s2 * (v[1] - v[2]) - s1 * (v[2] - v[3])
        assert extrap == pytest.approx(v[0], rel=1e-9, abs=1e-9)


@given(ratio, ratio)
def test_filter_weights_sum_to_one_and_kill_quadratics(a, b):
    t = nodes(a, b)
    w = ratio_filter_weights(a, b)
    assert sum(w) == pytest.approx(1.0, abs=1e-11)
    for poly in ([1.0, 0.0], [1.0, 0.0, 0.0]):
        v = np.polyval(poly, t)
        assert float(np.dot(w, v)) == pytest.approx(v[0], rel=1e-9, abs=1e-9)
