import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bdftf.adaptivity import (
    AdaptiveAbort,
    AdaptiveConfig,
    controller_decide,
    error_estimators,
    integrate_adaptive,
)
from bdftf.timeint import LinearODESystem, exact_history, scalar_decay_system

CFG = AdaptiveConfig(eps=1e-4)


def test_grow_branch():
    d = controller_decide(1e-6, 2e-6, 1e-4, 0.1, CFG)
    assert d.accepted and d.branch == "grow"
    assert d.theta == pytest.approx(min(2.0, (1e-4 / 2e-6) ** (1 / 3)))
    assert d.k_next == pytest.approx(0.1 * d.theta)


def test_growth_limited_by_max_growth():
    d = controller_decide(1e-12, 1e-12, 1e-4, 0.1, CFG)
    assert d.theta == 2.0 and d.k_next == pytest.approx(0.2)


def test_hold_branch_including_gap():
    d = controller_decide(5e-5, 1e-6, 1e-4, 0.1, CFG)
    assert d.accepted and d.branch == "hold" and d.k_next <= 0.1


def test_reject_branch():
    d = controller_decide(2e-4, 1e-6, 1e-4, 0.1, CFG)
    assert not d.accepted and d.branch == "reject"
    assert d.k_next == pytest.approx(0.05)


def test_tau_cap_and_bounds():
    cfg = AdaptiveConfig(eps=1e-4, tau_cap=1.0315, k_max=0.2)
    d = controller_decide(0.0, 0.0, 1e-4, 0.1, cfg)
    assert d.k_next == pytest.approx(0.10315)
    d = controller_decide(0.0, 0.0, 1e-4, 0.19, AdaptiveConfig(eps=1e-4, k_max=0.2))
    assert d.k_next == 0.2


def test_order_exponent():
    cfg = AdaptiveConfig(eps=1e-4, exponent="order")
    d = controller_decide(1e-6, 1e-6, 1e-4, 1.0, cfg, p=3)
    assert d.theta == pytest.approx(min(2.0, 100 ** 0.25))


@pytest.mark.parametrize("kw", [{"eps": 0}, {"gamma_check": 1.5}, {"k_min": 1.0, "k_max": 0.5},
                                {"exponent": "x"}, {"max_growth": 0.5}])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        AdaptiveConfig(**kw)


est = st.floats(0, 1e-2)


@given(est, est, st.floats(1e-6, 1e-2), st.floats(1e-4, 0.4))
def test_controller_deterministic_and_consistent(eu, ep, eps, k):
    a = controller_decide(eu, ep, eps, k, CFG)
    b = controller_decide(eu, ep, eps, k, CFG)
    assert a == b
    assert a.accepted == (max(eu, ep) <= eps)
    if a.accepted:
        assert CFG.k_min <= a.k_next <= CFG.k_max
        if max(eu, ep) >= eps / 4:
            assert a.k_next <= k * (1 + 1e-12) or a.k_next == CFG.k_min
    else:
        assert a.k_next < k


def test_estimator_is_relative_and_zero_on_cubics():
    system = LinearODESystem(np.eye(2), np.zeros((2, 2)))
    t = np.array([1.0, 0.8, 0.5, 0.3, 0.1])
    vals = [np.array([s**3, 2 * s**2]) for s in t]
    eu, _ = error_estimators(system, t, vals, 3)
    assert eu < 1e-12
    with pytest.raises(ValueError):
        error_estimators(system, t[:3], vals[:3], 3)


@pytest.mark.parametrize("scheme", ["BDF2", "BDF2_TF", "BDF3"])
def test_adaptive_run_respects_tolerance(scheme):
    lam = -2.0
    exact = lambda t: math.exp(lam * t)  # noqa: E731
    hist = exact_history(exact, [0.0, 0.01, 0.02])
    results = []
    for eps in (1e-4, 1e-6):
        res = integrate_adaptive(scalar_decay_system(lam), scheme, AdaptiveConfig(eps=eps, k_initial=0.01), hist, 2.0)
        assert res.trajectory.times[-1] == pytest.approx(2.0)
        assert res.max_accepted_estimate() <= eps
        results.append(res)
    assert results[1].mean_accepted_step() < results[0].mean_accepted_step()


def test_abort_after_repeated_rejections():
    hist = exact_history(math.exp, [0.0, 0.01, 0.02])
    cfg = AdaptiveConfig(eps=1e-30, k_initial=0.01, max_consecutive_rejections=3)
    with pytest.raises(AdaptiveAbort):
        integrate_adaptive(scalar_decay_system(1.0), "BDF2", cfg, hist, 1.0)


def test_no_estimator_for_fourth_order_filter():
    hist = exact_history(math.exp, [0.0, 0.01, 0.02, 0.03])
    with pytest.raises(ValueError):
        integrate_adaptive(scalar_decay_system(1.0), "BDF3_TF", CFG, hist, 1.0)
