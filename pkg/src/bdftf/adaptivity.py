"""Tolerance-driven step-size controller based on divided-difference estimators."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .timeint import StepHistory, filter_increment
from .timeint.coefficients import THEORY_RATIO_CAP
from .timeint.schemes import SchemeKind, StepFailure, Trajectory, advance

STEP_LOG_COLUMNS = ("step_index", "t", "k", "tau", "est_u", "est_phi", "status")


class AdaptiveAbort(RuntimeError):
    pass


@dataclass(frozen=True)
class AdaptiveConfig:
    eps: float = 1e-4
    gamma_hat: float = 1.0
    gamma_check: float = 0.5
    max_growth: float = 2.0
    tau_cap: float | None = None
    k_min: float = 1e-8
    k_max: float = 0.5
    k_initial: float | None = None
    max_consecutive_rejections: int = 30
    exponent: str = "cube_root"  # or "order" for 1/(p+1)

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("tolerance eps must be positive")
        if not (0 < self.gamma_check < 1 <= self.gamma_hat):
            raise ValueError("safety factors must satisfy 0 < gamma_check < 1 <= gamma_hat")
        if not (0 < self.k_min < self.k_max):
            raise ValueError("step bounds must satisfy 0 < k_min < k_max")
        if self.tau_cap is not None and not self.tau_cap > 0:
            raise ValueError("tau_cap must be positive")
        if self.exponent not in ("cube_root", "order"):
            raise ValueError("exponent must be 'cube_root' or 'order'")
        if self.max_growth < 1:
            raise ValueError("max_growth must be at least 1")

    def growth_exponent(self, p: int) -> float:
        return 1.0 / 3.0 if self.exponent == "cube_root" else 1.0 / (p + 1)


@dataclass(frozen=True)
class StepDecision:
    accepted: bool
    k_next: float
    theta: float
    est_u: float
    est_phi: float
    branch: str  # grow | hold | reject


def error_estimators(system, times, values, p: int) -> tuple:
    """Relative L2 norms of ``eta^{p+1} rho^{p+1}`` per field.

    ``values`` starts with the freshly computed (unfiltered) state followed
    by accepted states, newest first; ``times`` matches.
    """
    if len(values) < p + 2:
        raise ValueError(f"estimator of order {p + 1} needs {p + 2} nodes, got {len(values)}")
    inc = filter_increment(times, values, p)
    est = system.field_norms(inc)
    ref = system.field_norms(values[0])
    out = {name: est[name] / max(1.0, ref[name]) for name in est}
    return out.get("u", 0.0), out.get("phi", 0.0)


def _ratio(eps, est, e):
    return math.inf if est == 0 else (eps / est) ** e


def controller_decide(est_u: float, est_phi: float, eps: float, k: float, config: AdaptiveConfig,
                      p: int = 3) -> StepDecision:
    """Accept/grow, accept/hold or reject a step of size ``k``."""
    if est_u < 0 or est_phi < 0:
        raise ValueError("estimators must be non-negative")
    e = config.growth_exponent(p)
    worst = max(est_u, est_phi)
    if worst <= eps:
        cap = config.max_growth if worst < eps / 4 else 1.0
        branch = "grow" if worst < eps / 4 else "hold"
        theta = min(cap, _ratio(eps, est_u, e), _ratio(eps, est_phi, e))
        k_next = config.gamma_hat * theta * k
        if config.tau_cap is not None:
            k_next = min(k_next, config.tau_cap * k)
        k_next = min(max(k_next, config.k_min), config.k_max)
        return StepDecision(True, k_next, theta, est_u, est_phi, branch)
    k_retry = min(k / config.gamma_hat * config.gamma_check, config.k_max)
    return StepDecision(False, k_retry, config.gamma_check / config.gamma_hat, est_u, est_phi, "reject")


@dataclass
class AdaptiveResult:
    trajectory: Trajectory
    step_log: list = field(default_factory=list)

    @property
    def accepted(self) -> list:
        return [r for r in self.step_log if r["status"] == "accepted"]

    @property
    def rejections(self) -> int:
        return sum(r["status"] == "rejected" for r in self.step_log)

    def mean_accepted_step(self, exclude_truncated: bool = True) -> float:
        rows = [r for r in self.accepted if not (exclude_truncated and r.get("truncated"))]
        return float(np.mean([r["k"] for r in rows])) if rows else float("nan")

    def max_accepted_estimate(self) -> float:
        return max((max(r["est_u"], r["est_phi"]) for r in self.accepted), default=0.0)


def integrate_adaptive(system, scheme, config: AdaptiveConfig, initial_history: StepHistory, T: float,
                       on_accept=None) -> AdaptiveResult:
    """Adaptive march to ``T``; warm-up steps run until the estimator has enough nodes."""
    scheme = SchemeKind.parse(scheme)
    p = scheme.estimator_order
    if p is None:
        raise ValueError(f"{scheme.value} has no adaptive error estimator")
    history = initial_history.copy()
    if len(history) < scheme.initial_states:
        raise ValueError(f"{scheme.value} needs {scheme.initial_states} initial states")
    traj = Trajectory(n_initial=len(history))
    for t, s in zip(history.times[::-1], history.states[::-1]):
        traj.append(t, s)
    log: list = []
    k = config.k_initial if config.k_initial is not None else history.step(0)
    k = min(max(k, config.k_min), config.k_max)
    index = len(history) - 1
    rejections = 0
    while history.t < T - 1e-12 * max(abs(T), 1.0):
        remaining = T - history.t
        truncated = k >= remaining - 1e-9 * k
        k_try = remaining if truncated else k
        tau = k_try / history.step(0)
        res = advance(system, scheme, history, k_try, step_index=index + 1)
        if len(history) < p + 1:
            history.push(res.t, res.state)
            traj.append(res.t, res.state)
            index += 1
            log.append(_row(index, res.t, k_try, tau, float("nan"), float("nan"), "warmup", truncated))
            continue
        times = np.r_[res.t, history.times]
        est_u, est_phi = error_estimators(system, times, [res.hat, *history.states], p)
        dec = controller_decide(est_u, est_phi, config.eps, k_try, config, p)
        if dec.accepted:
            history.push(res.t, res.state)
            traj.append(res.t, res.state)
            index += 1
            log.append(_row(index, res.t, k_try, tau, est_u, est_phi, "accepted", truncated))
            if on_accept is not None:
                on_accept(index, res, history)
            rejections = 0
            # a truncated final step says nothing about the natural step size
            k = dec.k_next if not truncated else k
        else:
            log.append(_row(index + 1, res.t, k_try, tau, est_u, est_phi, "rejected", truncated))
            rejections += 1
            k = dec.k_next
            if k < config.k_min:
                raise AdaptiveAbort(
                    f"step size {k:.3e} fell below k_min={config.k_min:.3e} at t={history.t:.6g}"
                )
            if rejections > config.max_consecutive_rejections:
                raise AdaptiveAbort(
                    f"{rejections} consecutive rejections at t={history.t:.6g} (last k={k_try:.3e}, "
                    f"estimates u={est_u:.3e}, phi={est_phi:.3e}, eps={config.eps:.1e})"
                )
    return AdaptiveResult(traj, log)


def _row(i, t, k, tau, eu, ep, status, truncated):
    return {"step_index": i, "t": t, "k": k, "tau": tau, "est_u": eu, "est_phi": ep, "status": status,
            "truncated": bool(truncated)}


__all__ = [
    "AdaptiveAbort",
    "AdaptiveConfig",
    "AdaptiveResult",
    "STEP_LOG_COLUMNS",
    "StepDecision",
    "StepFailure",
    "THEORY_RATIO_CAP",
    "controller_decide",
    "error_estimators",
    "integrate_adaptive",
]
