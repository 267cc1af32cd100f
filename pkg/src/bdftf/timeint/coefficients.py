"""Closed-form coefficients of the variable-step BDF2 / filter family.

All functions take ``tau_n = k_{n+1}/k_n`` and ``tau_prev = k_n/k_{n-1}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

THEORY_RATIO_CAP = 1.0315


@dataclass(frozen=True)
class VariableStepCoefficients:
    tau_n: float
    tau_prev: float
    sigma: tuple  # (sigma1, sigma2, sigma3)
    beta: tuple
    gamma: tuple
    alpha: float

    @property
    def bdf2_weight(self) -> float:
        """Coefficient of the new value in the (unscaled) BDF2 combination."""
        a = self.tau_n
        return (1 + 2 * a) / (1 + a)


def _check_ratio(name, value):
    if not (value > 0 and math.isfinite(value)):
        raise ValueError(f"{name} must be a positive finite step ratio, got {value!r}")


def variable_step_coefficients(tau_n: float, tau_prev: float) -> VariableStepCoefficients:
    _check_ratio("tau_n", tau_n)
    _check_ratio("tau_prev", tau_prev)
    a, b = float(tau_n), float(tau_prev)
    q = 1 + b * (1 + a)  # recurring factor 1 + tau_{n-1}(1 + tau_n)

    sigma3 = 1.0
    sigma2 = a * (1 + b * (2 + a)) / (1 + b)
    sigma1 = a * b * b * (1 + a) / (1 + b)

    beta3 = 1 + a / (1 + a) + a * b / q
    beta2 = a * a / (1 + a) + a * a * b * (1 + b * (2 + a)) / ((1 + b) * q)
    beta1 = a * a * b**3 * (1 + a) / ((1 + b) * q)

    gamma3 = a * b * (1 + a) / ((1 + 2 * a) * q)
    gamma2 = a * a * b * (1 + a) * (1 + b * (2 + a)) / ((1 + 2 * a) * (1 + b) * q)
    gamma1 = a * a * b**3 * (1 + a) ** 2 / ((1 + 2 * a) * (1 + b) * q)

    alpha = -(a * b * (1 + a) ** 2 * q) / (6 * ((1 + 2 * a) * q + a * b * (1 + a)))

    return VariableStepCoefficients(
        tau_n=a,
        tau_prev=b,
        sigma=(sigma1, sigma2, sigma3),
        beta=(beta1, beta2, beta3),
        gamma=(gamma1, gamma2, gamma3),
        alpha=alpha,
    )


def ratio_filter_weights(tau_n: float, tau_prev: float) -> tuple:
    """Weights ``(w_hat, w_n, w_{n-1}, w_{n-2})`` of the filter written in step ratios."""
    c = variable_step_coefficients(tau_n, tau_prev)
    a, b, al = c.tau_n, c.tau_prev, c.alpha
    q = 1 + b * (a + 1)
    return (
        1 + al * 6 / ((a + 1) * q),
        -al * 6 / (1 + b),
        al * 6 * a / (1 + a),
        -al * 6 * b * b * a / ((1 + b) * q),
    )
