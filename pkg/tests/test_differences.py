import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bdftf.timeint import (
    divided_difference,
    eta_factor,
    filter_increment,
    lagrange_extrapolate,
    ratio_filter,
    reconstruct_hat,
    time_filter,
)

steps = st.lists(st.floats(0.05, 1.0), min_size=5, max_size=5)
coef = st.floats(-10, 10)


def times_from(ks, t0=1.0):
    # newest first
    return list(t0 - np.r_[0.0, np.cumsum(ks)])


def closed_form_dd(t, v):
    """Symmetric formula ``sum_i v_i / prod_{j != i} (t_i - t_j)``."""
    return sum(v[i] / math.prod(t[i] - t[j] for j in range(len(t)) if j != i) for i in range(len(t)))


@given(steps, st.lists(coef, min_size=5, max_size=5), st.integers(0, 4))
def test_divided_difference_matches_symmetric_formula(ks, vals, j):
    t = times_from(ks)
    got = divided_difference(t, vals, j)
    want = closed_form_dd(t[: j + 1], vals[: j + 1])
    assert got == pytest.approx(want, rel=1e-7, abs=1e-7 * max(1.0, abs(want)))


@given(steps, st.lists(coef, min_size=4, max_size=4))
def test_polynomial_exactness(ks, c):
    t = np.array(times_from(ks))
    for degree in range(4):
        v = np.polyval(c[: degree + 1], t)
        # top divided difference of a degree-d polynomial is its leading coefficient
        assert divided_difference(t, v, degree) == pytest.approx(c[0], rel=1e-6, abs=1e-6)
        assert abs(divided_difference(t, v, degree + 1)) < 1e-6 * (1 + sum(abs(x) for x in c))


@given(steps, st.lists(coef, min_size=4, max_size=4))
def test_estimators_annihilate_cubics(ks, c):
    t = np.array(times_from(ks))
    cubic = np.polyval(c, t)
    quad = np.polyval(c[1:], t)
    scale = 1 + sum(abs(x) for x in c)
    assert abs(filter_increment(t, cubic, 3)) < 1e-8 * scale
    assert abs(filter_increment(t, quad, 2)) < 1e-8 * scale


@given(steps, st.lists(coef, min_size=4, max_size=4))
def test_filter_hat_round_trip(ks, v):
    t = times_from(ks)
    hat, hist = v[0], v[1:]
    filtered = time_filter(hat, t, hist, 2)
    assert reconstruct_hat(filtered, t, hist) == pytest.approx(hat, rel=1e-8, abs=1e-8)


@given(steps, st.lists(coef, min_size=4, max_size=4))
def test_ratio_filter_equals_divided_difference_filter(ks, v):
    t = times_from(ks)
    a = ratio_filter(v[0], t, v[1:])
    b = time_filter(v[0], t, v[1:], 2)
    assert a == pytest.approx(b, rel=1e-8, abs=1e-8)


def test_constant_step_filters():
    t = [4.0, 3.0, 2.0, 1.0, 0.0]
    v = np.array([0.7, -0.4, 1.3, 2.0, 0.1])
    f2 = time_filter(v[0], t, v[1:], 2)
    assert f2 == pytest.approx(v[0] - 2 / 11 * (v[0] - 3 * v[1] + 3 * v[2] - v[3]), abs=1e-14)
    f3 = time_filter(v[0], t, v[1:], 3)
    assert f3 == pytest.approx(v[0] - 3 / 25 * (v[0] - 4 * v[1] + 6 * v[2] - 4 * v[3] + v[4]), abs=1e-14)


def test_eta_factor_unit_steps():
    assert eta_factor([3, 2, 1, 0], 2) == pytest.approx(2 / (1 + 1 / 2 + 1 / 3))


def test_array_states():
    t = [3.0, 2.0, 1.0, 0.0]
    vals = [np.full(3, x) for x in (9.0, 4.0, 1.0, 0.0)]
    assert np.allclose(divided_difference(t, vals, 2), 1.0)


def test_repeated_nodes_rejected():
    with pytest.raises(ValueError):
        divided_difference([1.0, 1.0], [0.0, 1.0], 1)
    with pytest.raises(ValueError):
        divided_difference([1.0], [0.0], 1)


def test_lagrange_extrapolate_cubic():
    t = [3.0, 2.5, 1.0, 0.0]
    f = lambda s: s**3 - 2 * s  # noqa: E731
    assert lagrange_extrapolate(t, [f(s) for s in t], 3.7) == pytest.approx(f(3.7))
