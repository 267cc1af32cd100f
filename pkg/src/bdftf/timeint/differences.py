"""Divided differences, filter factors, filters and extrapolations.

States may be scalars or numpy arrays of any shape. Sequences of times and
states are given newest first: ``times[0]`` is the newest node.
"""

from __future__ import annotations

import numpy as np

from .coefficients import ratio_filter_weights, variable_step_coefficients


def _distinct(times):
    t = np.asarray(times, dtype=float)
    if len(np.unique(t)) != len(t):
        raise ValueError("divided differences need distinct time nodes")
    return t


def divided_difference(times, values, j: int):
    """Newton divided difference ``w[t_0, ..., t_j]`` over the first j+1 nodes."""
    if j < 0:
        raise ValueError("order must be non-negative")
    if len(times) < j + 1 or len(values) < j + 1:
        raise ValueError(f"order {j} divided difference needs {j + 1} nodes")
    t = _distinct(times[: j + 1])
    table = [np.asarray(v, dtype=float) for v in values[: j + 1]]
    for level in range(1, j + 1):
        table = [(table[i] - table[i + 1]) / (t[i] - t[i + level]) for i in range(len(table) - 1)]
    return table[0]


def eta_factor(times, p: int) -> float:
    """``prod_{i=1..p}(t_0 - t_i) / sum_{j=1..p+1} 1/(t_0 - t_j)``."""
    if len(times) < p + 2:
        raise ValueError(f"eta factor of order {p + 1} needs {p + 2} nodes")
    t = _distinct(times[: p + 2])
    d = t[0] - t[1:]
    return float(np.prod(d[:p]) / np.sum(1.0 / d))


def filter_increment(times, values, p: int):
    """``eta^{p+1} rho^{p+1}`` of the newest value; also the local error estimate."""
    return eta_factor(times, p) * divided_difference(times, values, p + 1)


def time_filter(hat, times, history, p: int):
    """Filter a freshly computed value ``hat`` at ``times[0]``.

    ``history`` holds the p+1 previous accepted states, newest first.
    """
    values = [hat, *history[: p + 1]]
    if len(values) < p + 2:
        raise ValueError(f"order-{p} filter needs {p + 1} previous states")
    return np.asarray(hat, dtype=float) - filter_increment(times, values, p)


def _ratios(times):
    t = np.asarray(times[:4], dtype=float)
    k_new, k_n, k_prev = t[0] - t[1], t[1] - t[2], t[2] - t[3]
    return k_new / k_n, k_n / k_prev


def ratio_filter(hat, times, history):
    """The order-2 filter written with step ratios; equals ``time_filter(p=2)``."""
    w = ratio_filter_weights(*_ratios(times))
    return w[0] * np.asarray(hat) + w[1] * history[0] + w[2] * history[1] + w[3] * history[2]


def reconstruct_hat(filtered, times, history):
    """Invert the order-2 filter: recover the unfiltered value from the filtered one."""
    g1, g2, g3 = variable_step_coefficients(*_ratios(times)).gamma
    f = np.asarray(filtered, dtype=float)
    u0, u1, u2 = history[:3]
    return f + g3 * (f - u0) - g2 * (u0 - u1) + g1 * (u1 - u2)


def sigma_extrapolate(history, tau_n: float, tau_prev: float):
    """Lagged extrapolation ``sigma3 w^n + sigma2 dw^n - sigma1 dw^{n-1}`` to t_{n+1}."""
    if len(history) < 3:
        raise ValueError("sigma extrapolation needs three states")
    s1, s2, s3 = variable_step_coefficients(tau_n, tau_prev).sigma
    w0, w1, w2 = (np.asarray(w, dtype=float) for w in history[:3])
    return s3 * w0 + s2 * (w0 - w1) - s1 * (w1 - w2)


def lagrange_extrapolate(times, history, t_new):
    """Value at ``t_new`` of the polynomial interpolating all given states."""
    t = _distinct(times)
    if len(history) < len(t):
        raise ValueError("need one state per node")
    out = 0.0
    for i, ti in enumerate(t):
        w = np.prod([(t_new - tj) / (ti - tj) for j, tj in enumerate(t) if j != i])
        out = out + w * np.asarray(history[i], dtype=float)
    return out
