"""Manufactured solution, step schedules and error metrics.

The closed-form solution lives on the fluid box (0,1)x(1,2) over the porous
box (0,1)x(0,1). All derivatives are written out by hand; the test suite
checks them against finite differences.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import fem
from .mesh import build_rect_union
from .model import PhysicalParams, ProblemData, StokesDarcySystem
from .timeint import StepHistory

PI = math.pi
FLUID_RECT = ((0.0, 1.0), (1.0, 2.0))
POROUS_RECT = ((0.0, 1.0), (0.0, 1.0))


class ExactSolution2D:
    """Closed-form (u, p, phi) with the forcing that makes it exact."""

    def __init__(self, params: PhysicalParams | None = None):
        self.params = params or PhysicalParams()

    # spatial profiles -------------------------------------------------------
    @staticmethod
    def _A(x):
        return 2 - PI * np.sin(PI * x)

    @staticmethod
    def _B(y):
        return 1 - y - np.cos(PI * y)

    def u(self, x, y, t):
        c = np.cos(t)
        return np.array([(x**2 * (y - 1) ** 2 + y) * c, (-2 / 3 * x * (y - 1) ** 3 + self._A(x)) * c])

    def p(self, x, y, t):
        return self._A(x) * np.sin(PI * y / 2) * np.cos(t)

    def phi(self, x, y, t):
        return self._A(x) * self._B(y) * np.cos(t)

    def grad_u(self, x, y, t):
        """``[i, j] = d u_i / d x_j``."""
        c = np.cos(t)
        return np.array([
            [2 * x * (y - 1) ** 2 * c, (2 * x**2 * (y - 1) + 1) * c],
            [(-2 / 3 * (y - 1) ** 3 - PI**2 * np.cos(PI * x)) * c, -2 * x * (y - 1) ** 2 * c],
        ])

    def grad_p(self, x, y, t):
        c = np.cos(t)
        return np.array([
            -PI**2 * np.cos(PI * x) * np.sin(PI * y / 2) * c,
            self._A(x) * PI / 2 * np.cos(PI * y / 2) * c,
        ])

    def grad_phi(self, x, y, t):
        c = np.cos(t)
        dA = -PI**2 * np.cos(PI * x)
        dB = -1 + PI * np.sin(PI * y)
        return np.array([dA * self._B(y) * c, self._A(x) * dB * c])

    def laplace_u(self, x, y, t):
        c = np.cos(t)
        return np.array([
            (2 * (y - 1) ** 2 + 2 * x**2) * c,
            (PI**3 * np.sin(PI * x) - 4 * x * (y - 1)) * c,
        ])

    def hessian_phi(self, x, y, t):
        c = np.cos(t)
        A, B = self._A(x), self._B(y)
        dA, d2A = -PI**2 * np.cos(PI * x), PI**3 * np.sin(PI * x)
        dB, d2B = -1 + PI * np.sin(PI * y), PI**2 * np.cos(PI * y)
        return np.array([[d2A * B, dA * dB], [dA * dB, A * d2B]]) * c

    def u_t(self, x, y, t):
        s = -np.sin(t)
        return np.array([(x**2 * (y - 1) ** 2 + y) * s, (-2 / 3 * x * (y - 1) ** 3 + self._A(x)) * s])

    def phi_t(self, x, y, t):
        return -self._A(x) * self._B(y) * np.sin(t)

    # forcing ----------------------------------------------------------------
    def f1(self, x, y, t):
        nu = self.params.nu
        return self.u_t(x, y, t) - nu * self.laplace_u(x, y, t) + self.grad_p(x, y, t)

    def f2(self, x, y, t):
        K = self.params.K_tensor
        H = self.hessian_phi(x, y, t)
        div = K[0, 0] * H[0, 0] + (K[0, 1] + K[1, 0]) * H[0, 1] + K[1, 1] * H[1, 1]
        return self.params.S * self.phi_t(x, y, t) - div

    # interface ----------------------------------------------------------------
    def stokes_interface_load(self, x, y, t, n, tau):
        """Traction mismatch so the weak Stokes form holds for the exact solution."""
        pr = self.params
        G = self.grad_u(x, y, t)
        n0, n1 = n[..., 0], n[..., 1]
        t0, t1 = tau[..., 0], tau[..., 1]
        u = self.u(x, y, t)
        gn = np.array([G[0, 0] * n0 + G[0, 1] * n1, G[1, 0] * n0 + G[1, 1] * n1])
        ut = u[0] * t0 + u[1] * t1
        scal = pr.g * self.phi(x, y, t) - self.p(x, y, t)
        return pr.nu * gn + scal * np.array([n0, n1]) + pr.bjs_weight * ut * np.array([t0, t1])

    def darcy_interface_load(self, x, y, t, n, tau):
        """``(K grad phi) . n_p - u . n_f`` with ``n_p = -n_f``."""
        K = self.params.K_tensor
        gp = self.grad_phi(x, y, t)
        kg = np.array([K[0, 0] * gp[0] + K[0, 1] * gp[1], K[1, 0] * gp[0] + K[1, 1] * gp[1]])
        u = self.u(x, y, t)
        n0, n1 = n[..., 0], n[..., 1]
        return -(kg[0] * n0 + kg[1] * n1) - (u[0] * n0 + u[1] * n1)

    def interface_residuals(self, t, n_points: int = 101) -> dict:
        """Max-abs residuals of the three strong interface conditions on y = 1."""
        pr = self.params
        x = np.linspace(0, 1, n_points)
        y = np.ones_like(x)
        nf = np.array([0.0, -1.0])
        npor = -nf
        tau = np.array([1.0, 0.0])
        u = self.u(x, y, t)
        G = self.grad_u(x, y, t)
        dudn = np.einsum("ijq,j->iq", G, nf)
        K = pr.K_tensor
        kg = K @ self.grad_phi(x, y, t)
        mass = u.T @ nf - kg.T @ npor
        normal = self.p(x, y, t) - pr.nu * (nf @ dudn) - pr.g * self.phi(x, y, t)
        slip_coef = pr.alpha_bjs * pr.nu * math.sqrt(2) / math.sqrt(np.trace(K))
        slip = -pr.nu * (tau @ dudn) - slip_coef * (u.T @ tau)
        return {
            "mass_conservation": float(np.max(np.abs(mass))),
            "normal_stress": float(np.max(np.abs(normal))),
            "bjs": float(np.max(np.abs(slip))),
        }

    def weak_interface_mismatch(self, t, n_points: int = 101) -> float:
        """Largest interface source needed for the weak form to hold exactly on y = 1."""
        x = np.linspace(0, 1, n_points)
        y = np.ones_like(x)
        n = np.broadcast_to([0.0, -1.0], (n_points, 2))
        tau = np.broadcast_to([1.0, 0.0], (n_points, 2))
        a = np.abs(self.stokes_interface_load(x, y, t, n, tau)).max()
        b = np.abs(self.darcy_interface_load(x, y, t, n, tau)).max()
        return float(max(a, b))

    def needs_compensation(self, t_samples=(0.0, 0.5, 1.0), tol=1e-8) -> bool:
        """True when either the strong conditions or the weak interface terms leave a residual.

        The strong slip law and the weak-form slip term use different
        coefficients, so the strong check alone is not sufficient.
        """
        return any(
            max(self.interface_residuals(t).values()) > tol or self.weak_interface_mismatch(t) > tol
            for t in t_samples
        )

    # FE data ------------------------------------------------------------------
    def problem_data(self, compensate: bool | None = None) -> ProblemData:
        if compensate is None:
            compensate = True
        return ProblemData(
            f1=self.f1,
            f2=self.f2,
            velocity_bc={"fluid_wall": self.u},
            head_bc={"porous_dirichlet": self.phi},
            stokes_interface_load=self.stokes_interface_load if compensate else None,
            darcy_interface_load=self.darcy_interface_load if compensate else None,
        )

    def state(self, system: StokesDarcySystem, t: float) -> np.ndarray:
        return system.interpolate(
            lambda x, y: self.u(x, y, t), lambda x, y: self.p(x, y, t), lambda x, y: self.phi(x, y, t)
        )

    def rate(self, system: StokesDarcySystem, t: float) -> np.ndarray:
        """Interpolated time derivative (zero pressure rate)."""
        return system.interpolate(lambda x, y: self.u_t(x, y, t), None, lambda x, y: self.phi_t(x, y, t))

    def projected_state(self, system: StokesDarcySystem, t: float) -> np.ndarray:
        """Stationary coupled projection: the discrete state whose residual is the exact rate."""
        return system.stationary_solve(t, self.rate(system, t))


def exact_solution_2d(params: PhysicalParams | None = None) -> ExactSolution2D:
    return ExactSolution2D(params)


def manufactured_problem(n: int, degrees=(2, 1, 2), params: PhysicalParams | None = None,
                         compensate: bool | None = None):
    """Coupled system on an ``n x n`` grid per box and its exact solution."""
    params = params or PhysicalParams()
    exact = ExactSolution2D(params)
    mesh = build_rect_union(FLUID_RECT, POROUS_RECT, n, n, n)
    if compensate is None:
        compensate = exact.needs_compensation()
    system = StokesDarcySystem(mesh, params, exact.problem_data(compensate), degrees)
    return system, exact


INITIAL_MODES = ("interpolate", "projection")


def exact_initial_history(system, exact, times, mode: str = "interpolate") -> StepHistory:
    """Initial states from the closed form, either nodal interpolants or stationary projections.

    Interpolants ignore the discrete incompressibility constraint and excite
    slowly damped parasitic modes of the filtered schemes; projections
    avoid that.
    """
    if mode == "interpolate":
        states = [exact.state(system, t) for t in times]
    elif mode == "projection":
        states = [exact.projected_state(system, t) for t in times]
    else:
        raise ValueError(f"unknown initial-data mode {mode!r}; expected one of {INITIAL_MODES}")
    return StepHistory(list(times), states)


# -- step schedules ---------------------------------------------------------------

@dataclass(frozen=True)
class StepSchedule:
    """Evaluator ``(n, t_n) -> k_{n+1}``."""

    name: str
    rule: Callable = field(repr=False)
    is_constant: bool = False

    def __call__(self, n: int, t_n: float) -> float:
        k = float(self.rule(n, t_n))
        if not k > 0:
            raise ValueError(f"schedule {self.name} produced non-positive step {k} at n={n}, t={t_n}")
        return k

    def times(self, t0: float, count: int) -> np.ndarray:
        """First ``count`` time nodes starting at ``t0``."""
        t = [float(t0)]
        for n in range(count - 1):
            t.append(t[-1] + self(n, t[-1]))
        return np.array(t)

    def ratios(self, t0: float, n_steps: int) -> np.ndarray:
        k = np.diff(self.times(t0, n_steps + 1))
        return k[1:] / k[:-1]


def _kn1(n, t):
    return 0.025 + 0.0125 * t


def _kn2(n, t):
    return 0.025 if n <= 10 else 0.025 + 0.0125 * math.sin(10 * t)


def _kn3(n, t):
    return 0.025 - 0.0125 * t


def _kn5(n, t):
    return 0.01 if n <= 10 else 0.01 + 0.005 * math.sin(10 * t)


NAMED_SCHEDULES = {"k_n1": _kn1, "k_n2": _kn2, "k_n3": _kn3, "k_n5": _kn5}


def constant_schedule(k: float) -> StepSchedule:
    if not k > 0:
        raise ValueError("constant step must be positive")
    return StepSchedule(f"constant({k:g})", lambda n, t: k, True)


def step_schedule(name: str) -> StepSchedule:
    """Named schedule (``k_n1``, ``k_n2``, ``k_n3``, ``k_n5``) or ``constant(<k>)``."""
    key = name.strip()
    if key in NAMED_SCHEDULES:
        return StepSchedule(key, NAMED_SCHEDULES[key])
    if key.startswith("constant(") and key.endswith(")"):
        return constant_schedule(float(key[len("constant("):-1]))
    raise ValueError(f"unknown step schedule {name!r}; known: {sorted(NAMED_SCHEDULES)} or constant(<k>)")


# -- error metrics --------------------------------------------------------------

def field_error(system: StokesDarcySystem, state, exact: ExactSolution2D, t: float, fieldname: str,
                norm: str = "L2") -> tuple:
    """``(||error||, ||exact||)`` of one field at time ``t``."""
    u, p, phi = system.split(state)
    space, coeffs = {"u": (system.U, u), "p": (system.Q, p), "phi": (system.H, phi)}[fieldname]
    if norm == "L2":
        f = {"u": exact.u, "p": exact.p, "phi": exact.phi}[fieldname]
    else:
        f = {"u": exact.grad_u, "p": exact.grad_p, "phi": exact.grad_phi}[fieldname]
    zero = np.zeros_like(coeffs)
    err = fem.error_norm(space, coeffs, f, norm, t=t, exactness=system.exactness)
    ref = fem.error_norm(space, zero, f, norm, t=t, exactness=system.exactness)
    return err, ref


def global_error(times, errors, norms, start: int = 3) -> float:
    """``(sum_{i>=start} k_i ||e_i||^2 / ||Phi(t_i)||^2)^{1/2}`` with ``k_i = t_i - t_{i-1}``."""
    times = np.asarray(times, dtype=float)
    total = 0.0
    for i in range(max(start, 1), len(times)):
        if norms[i] <= 1e-14:
            warnings.warn(f"exact field vanishes at t={times[i]:.6g}; index {i} excluded", RuntimeWarning,
                          stacklevel=2)
            continue
        total += (times[i] - times[i - 1]) * (errors[i] / norms[i]) ** 2
    return math.sqrt(total)


def trajectory_global_error(system, trajectory, exact, fieldname, start: int = 3) -> float:
    errs, refs = zip(*(field_error(system, s, exact, t, fieldname) for t, s in zip(trajectory.times,
                                                                                   trajectory.states)))
    return global_error(trajectory.times, errs, refs, start)


def observed_order(err_coarse: float, err_fine: float, ratio: float) -> float:
    if not (err_coarse > 0 and err_fine > 0):
        raise ValueError("errors must be positive")
    if not ratio > 1:
        raise ValueError("refinement ratio must exceed 1")
    return math.log(err_coarse / err_fine) / math.log(ratio)


def fitted_order(resolutions, errors) -> float:
    """Least-squares slope of log(error) against log(1/resolution)."""
    if len(errors) < 3:
        raise ValueError("orders are fitted from at least three resolutions")
    x = np.log(np.asarray(resolutions, dtype=float))
    y = np.log(np.asarray(errors, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


def cauchy_ratio(v_k, v_k2, v_k4, mass=None) -> float:
    """``||v_k - v_{k/2}|| / ||v_{k/2} - v_{k/4}||`` (mass-matrix norm if given)."""
    def nrm(x):
        x = np.asarray(x, dtype=float)
        return math.sqrt(max(float(x @ (mass @ x)), 0.0)) if mass is not None else float(np.linalg.norm(x))

    den = nrm(np.asarray(v_k2) - np.asarray(v_k4))
    if den == 0.0:
        raise ZeroDivisionError("Cauchy ratio undefined: the two finest solutions coincide")
    return nrm(np.asarray(v_k) - np.asarray(v_k2)) / den


def expected_cauchy_ratio(order: float) -> float:
    return (4**order - 2**order) / (2**order - 1)


@dataclass
class ConvergenceReport:
    resolutions: list = field(default_factory=list)
    err_u: list = field(default_factory=list)
    err_phi: list = field(default_factory=list)
    err_p: list = field(default_factory=list)
    wall_seconds: list = field(default_factory=list)
    cauchy: dict = field(default_factory=dict)

    def add(self, resolution, err_u, err_phi, err_p=None, wall=0.0):
        self.resolutions.append(resolution)
        self.err_u.append(err_u)
        self.err_phi.append(err_phi)
        self.err_p.append(err_p)
        self.wall_seconds.append(wall)

    def pairwise_orders(self, errors) -> list:
        out = [None]
        for i in range(1, len(errors)):
            ratio = self.resolutions[i - 1] / self.resolutions[i]
            out.append(observed_order(errors[i - 1], errors[i], ratio))
        return out

    @property
    def rho_u(self) -> float:
        return fitted_order(self.resolutions, self.err_u)

    @property
    def rho_phi(self) -> float:
        return fitted_order(self.resolutions, self.err_phi)

    def rows(self) -> list:
        ru = self.pairwise_orders(self.err_u)
        rp = self.pairwise_orders(self.err_phi)
        return [
            {"resolution": r, "err_u": eu, "rho_u": a, "err_phi": ep, "rho_phi": b, "wall_seconds": w}
            for r, eu, a, ep, b, w in zip(self.resolutions, self.err_u, ru, self.err_phi, rp, self.wall_seconds)
        ]
