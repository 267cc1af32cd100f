"""Scheme drivers over an implicit linear evolution contract.

A *system* must provide

``solve(weight, t, mass_rhs, lagged)``
    solve ``(weight M + A) x = M mass_rhs + F(t) + coupling(lagged)`` with
    whatever boundary constraints hold at time ``t``;
``finalize(state, t)``
    re-impose constraints after a filter touched the state;
``field_norms(vector)``
    dict of per-field L2 norms (used by the adaptive estimator).

Schemes own all history combinations; systems own the space discretization.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ..linalg import SingularMatrixError
from .coefficients import variable_step_coefficients
from .differences import lagrange_extrapolate, sigma_extrapolate, time_filter
from .history import StepHistory


class SchemeKind(enum.Enum):
    BDF2 = "BDF2"
    BDF2_TF = "BDF2_TF"
    BDF3 = "BDF3"
    BDF3_TF_CONST = "BDF3_TF_CONST"

    @classmethod
    def parse(cls, name) -> "SchemeKind":
        if isinstance(name, cls):
            return name
        key = str(name).strip().upper().replace("-", "_")
        aliases = {"BDF3_TF": "BDF3_TF_CONST"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown scheme {name!r}; expected one of {[s.value for s in cls]}") from None

    @property
    def initial_states(self) -> int:
        return 4 if self is SchemeKind.BDF3_TF_CONST else 3

    @property
    def filter_order(self):
        return {SchemeKind.BDF2_TF: 2, SchemeKind.BDF3_TF_CONST: 3}.get(self)

    @property
    def estimator_order(self):
        """``p`` in the ``eta^{p+1} rho^{p+1}`` error estimator, None if unsupported."""
        return {SchemeKind.BDF2: 2, SchemeKind.BDF2_TF: 3, SchemeKind.BDF3: 3}.get(self)

    @property
    def order(self) -> int:
        return {SchemeKind.BDF2: 2, SchemeKind.BDF2_TF: 3, SchemeKind.BDF3: 3, SchemeKind.BDF3_TF_CONST: 4}[self]


class StepFailure(RuntimeError):
    def __init__(self, step_index: int, t: float, reason: str):
        super().__init__(f"step {step_index} to t={t:.6g} failed: {reason}")
        self.step_index = step_index
        self.t = t


@dataclass
class StepResult:
    t: float
    k: float
    state: np.ndarray
    hat: np.ndarray


def implicit_weights(scheme: SchemeKind, history: StepHistory, k: float):
    """Mass weight and mass right-hand side of the implicit substep."""
    s = history.states
    tau_n, tau_prev = history.ratios(k)
    if scheme in (SchemeKind.BDF2, SchemeKind.BDF2_TF):
        a = tau_n
        weight = (1 + 2 * a) / ((1 + a) * k)
        rhs = ((1 + a) * s[0] - a * a / (1 + a) * s[1]) / k
    else:
        b1, b2, b3 = variable_step_coefficients(tau_n, tau_prev).beta
        weight = b3 / k
        rhs = (b3 * s[0] + b2 * (s[0] - s[1]) - b1 * (s[1] - s[2])) / k
    return weight, rhs


def lagged_interface_data(scheme: SchemeKind, history: StepHistory, k: float):
    """Extrapolated state handed to the interface coupling terms."""
    s = history.states
    tau_n, tau_prev = history.ratios(k)
    if scheme is SchemeKind.BDF2:
        return (1 + tau_n) * s[0] - tau_n * s[1]
    if scheme is SchemeKind.BDF3_TF_CONST:
        t = history.times
        return lagrange_extrapolate(t[:4], s[:4], t[0] + k)
    return sigma_extrapolate(s, tau_n, tau_prev)


_variable_bdf3tf_warned = False


def _warn_variable_bdf3tf(history, k):
    global _variable_bdf3tf_warned
    t = history.times[:4]
    steps = np.r_[k, -np.diff(t)]
    if np.ptp(steps) > 1e-9 * steps.max() and not _variable_bdf3tf_warned:
        warnings.warn(
            "BDF3_TF_CONST on a variable step sequence is experimental: the fourth-order "
            "filter is only established for constant steps",
            RuntimeWarning,
            stacklevel=3,
        )
        _variable_bdf3tf_warned = True


def advance(system, scheme, history: StepHistory, k: float, step_index: int = -1) -> StepResult:
    """Compute the state at ``history.t + k`` without modifying ``history``."""
    scheme = SchemeKind.parse(scheme)
    if len(history) < scheme.initial_states:
        raise ValueError(f"{scheme.value} needs {scheme.initial_states} states in history, got {len(history)}")
    if not (k > 0 and math.isfinite(k)):
        raise ValueError(f"step size must be positive and finite, got {k!r}")
    if scheme is SchemeKind.BDF3_TF_CONST:
        _warn_variable_bdf3tf(history, k)
    t_new = history.t + k
    weight, rhs = implicit_weights(scheme, history, k)
    lagged = lagged_interface_data(scheme, history, k)
    try:
        hat = system.solve(weight, t_new, rhs, lagged)
    except SingularMatrixError as exc:
        raise StepFailure(step_index, t_new, str(exc)) from exc
    p = scheme.filter_order
    if p is None:
        state = hat
    else:
        times = np.r_[t_new, history.times]
        state = system.finalize(time_filter(hat, times, history.states, p), t_new)
    if not np.all(np.isfinite(state)):
        raise StepFailure(step_index, t_new, "non-finite values in the new state")
    return StepResult(t_new, k, np.asarray(state, dtype=float), np.asarray(hat, dtype=float))


@dataclass
class Trajectory:
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    n_initial: int = 0

    def append(self, t, state):
        self.times.append(float(t))
        self.states.append(np.asarray(state, dtype=float))

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.times)

    def __len__(self):
        return len(self.times)


def _reached(t, T, k_ref):
    return T is not None and t >= T - 1e-10 * max(k_ref, 1e-300)


def integrate_fixed_schedule(system, scheme, schedule, initial_history: StepHistory, T=None, n_steps=None,
                             on_step=None) -> Trajectory:
    """March with steps ``schedule(n, t_n)`` until ``T`` or ``n_steps`` new steps.

    The index ``n`` counts from the oldest initial state (index 0). A step
    that would pass ``T`` is shortened to land on it.
    """
    scheme = SchemeKind.parse(scheme)
    if T is None and n_steps is None:
        raise ValueError("give T or n_steps")
    history = initial_history.copy()
    traj = Trajectory(n_initial=len(history))
    for t, s in zip(history.times[::-1], history.states[::-1]):
        traj.append(t, s)
    n = len(history) - 1
    taken = 0
    while True:
        if n_steps is not None and taken >= n_steps:
            break
        k = float(schedule(n, history.t))
        if not (k > 0 and math.isfinite(k)):
            raise StepFailure(n + 1, history.t, f"schedule returned invalid step {k!r}")
        if _reached(history.t, T, k):
            break
        if T is not None and history.t + k > T - 1e-9 * k:
            k = T - history.t
        res = advance(system, scheme, history, k, step_index=n + 1)
        history.push(res.t, res.state)
        traj.append(res.t, res.state)
        if on_step is not None:
            on_step(n + 1, res, history)
        n += 1
        taken += 1
    return traj


class LinearODESystem:
    """``M u' + A u = F(t)`` with small dense matrices; reference system for tests."""

    def __init__(self, mass, stiffness, forcing=None):
        self.M = np.atleast_2d(np.asarray(mass, dtype=float))
        self.A = np.atleast_2d(np.asarray(stiffness, dtype=float))
        if self.M.shape != self.A.shape or self.M.shape[0] != self.M.shape[1]:
            raise ValueError("mass and stiffness must be square and of equal shape")
        self.forcing = forcing

    @property
    def n(self):
        return self.M.shape[0]

    def solve(self, weight, t, mass_rhs, lagged=None):
        rhs = self.M @ np.asarray(mass_rhs, dtype=float).reshape(self.n)
        if self.forcing is not None:
            rhs = rhs + np.asarray(self.forcing(t), dtype=float).reshape(self.n)
        lhs = weight * self.M + self.A
        try:
            return np.linalg.solve(lhs, rhs)
        except np.linalg.LinAlgError as exc:
            raise SingularMatrixError(str(exc)) from exc

    def finalize(self, state, t):
        return state

    def field_norms(self, vec):
        return {"u": float(np.linalg.norm(vec))}


def scalar_decay_system(lam: float = -1.0) -> LinearODESystem:
    """``u' = lam u`` as a one-dimensional linear system."""
    return LinearODESystem([[1.0]], [[-lam]])


def exact_history(exact, times) -> StepHistory:
    """History from a closed-form solution sampled at ``times`` (oldest first)."""
    return StepHistory(list(times), [np.atleast_1d(exact(t)) for t in times])
