"""Finite-element Stokes-Darcy system with decoupled implicit substeps.

State vectors are laid out as ``[u (interleaved x/y), p, phi]``. The Stokes
substep solves the saddle-point system for ``(u, p)``; the Darcy substep
solves for ``phi``. Each substep sees the other subdomain only through the
lagged (extrapolated) interface data it is handed, so the two solves are
independent within a step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from . import fem
from .linalg import FactorizationCache, solve_direct
from .mesh import FLUID, POROUS, CoupledMesh
from .timeint import StepHistory, variable_step_coefficients
from .timeint.schemes import SchemeKind, advance


@dataclass(frozen=True)
class PhysicalParams:
    nu: float = 1.0
    g: float = 1.0
    S: float = 1.0
    K: object = 1.0  # scalar or 2x2 SPD tensor
    alpha_bjs: float = 1.0

    def __post_init__(self):
        for name in ("nu", "g", "S"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive, got {v!r}")
        if not (self.alpha_bjs >= 0 and math.isfinite(self.alpha_bjs)):
            raise ValueError(f"alpha_bjs must be non-negative, got {self.alpha_bjs!r}")
        K = self.K_tensor
        if not np.allclose(K, K.T) or np.linalg.eigvalsh(K).min() <= 0:
            raise ValueError("hydraulic conductivity must be symmetric positive definite")

    @property
    def K_tensor(self) -> np.ndarray:
        K = np.asarray(self.K, dtype=float)
        return K * np.eye(2) if K.ndim == 0 else K.reshape(2, 2)

    @property
    def bjs_weight(self) -> float:
        return self.alpha_bjs * math.sqrt(self.nu * self.g) / math.sqrt(np.trace(self.K_tensor))


Field = Optional[Callable]


@dataclass
class ProblemData:
    """Forcing and boundary data; every callable takes ``(x, y, t)``.

    ``velocity_bc`` maps fluid boundary tags to velocity data (None means
    zero); tags left out are natural (do-nothing) boundaries. ``head_bc``
    does the same for the porous side. The two interface loads are extra
    source terms on the interface, called as ``(x, y, t, n_f, tau)``; they
    are only needed when a prescribed solution does not satisfy the
    interface conditions exactly.
    """

    f1: Field = None
    f2: Field = None
    velocity_bc: dict = field(default_factory=lambda: {"fluid_wall": None, "fluid_inflow": None})
    head_bc: dict = field(default_factory=lambda: {"porous_dirichlet": None})
    stokes_interface_load: Field = None
    darcy_interface_load: Field = None


@dataclass
class EnergyDiagnostics:
    E: float
    F: float


class StokesDarcySystem:
    """Assembled blocks plus the implicit solves used by the time integrators."""

    def __init__(self, mesh: CoupledMesh, params: PhysicalParams, problem: ProblemData | None = None,
                 degrees=(2, 1, 2)):
        self.mesh = mesh
        self.params = params
        self.problem = problem or ProblemData()
        du, dp, dh = degrees
        self.degrees = tuple(degrees)
        self.U = fem.FiniteElementSpace(mesh, du, FLUID, components=2)
        self.Q = fem.FiniteElementSpace(mesh, dp, FLUID)
        self.H = fem.FiniteElementSpace(mesh, dh, POROUS)
        self.exactness = 2 * max(degrees) + 2
        ex = self.exactness
        self.has_interface = len(mesh.interface_edges) > 0
        self.n_u, self.n_p, self.n_phi = self.U.n_dofs, self.Q.n_dofs, self.H.n_dofs
        self.n = self.n_u + self.n_p + self.n_phi
        self.slices = {
            "u": slice(0, self.n_u),
            "p": slice(self.n_u, self.n_u + self.n_p),
            "phi": slice(self.n_u + self.n_p, self.n),
        }

        g, S, nu = params.g, params.S, params.nu
        self.mass_u = fem.mass_matrix(self.U, exactness=ex)
        self.grad_u = fem.stiffness_matrix(self.U, exactness=ex)
        self.mass_phi = fem.mass_matrix(self.H, exactness=ex)
        self.grad_phi_K = fem.stiffness_matrix(self.H, params.K_tensor, exactness=ex)
        self.M_f = self.mass_u
        self.M_p = (g * S) * self.mass_phi
        self.A_p = g * self.grad_phi_K
        self.B = fem.divergence_matrix(self.U, self.Q, exactness=ex)
        if self.has_interface:
            self.bjs = fem.interface_tangential_matrix(self.U, params.bjs_weight, exactness=ex)
            self.C_nf = fem.interface_normal_matrix(self.U, self.H, g, exactness=ex)
        else:
            self.bjs = sp.csr_matrix((self.n_u, self.n_u))
            self.C_nf = sp.csr_matrix((self.n_u, self.n_phi))
        self.A_f = (nu * self.grad_u + self.bjs).tocsr()
        self.C_fn = self.C_nf.T.tocsr()

        self._u_bc = self._collect_bc(self.U, self.problem.velocity_bc)
        self._phi_bc = self._collect_bc(self.H, self.problem.head_bc)
        # pressure is fixed by the natural boundaries unless the fluid
        # region is enclosed by Dirichlet walls
        natural = self.has_interface or any(
            len(mesh.edges_with_tag(t)) for t in ("fluid_wall", "fluid_inflow", "fluid_outflow")
            if t not in self.problem.velocity_bc
        )
        self.pin_pressure = not natural and self.n_p > 0
        self._cache_f = FactorizationCache()
        self._cache_p = FactorizationCache()

    # -- boundary data -----------------------------------------------------
    @staticmethod
    def _collect_bc(space, mapping):
        items = []
        seen = set()
        for tag, g in mapping.items():
            dofs, _ = fem.dirichlet_data(space, tag, None)
            items.append((tag, g, dofs))
            seen.update(dofs.tolist())
        return items, np.array(sorted(seen), dtype=np.int64)

    @staticmethod
    def _bc_values(space, bc, t):
        """Later tags in the mapping override earlier ones on shared nodes."""
        items, all_dofs = bc
        vals = np.zeros(space.n_dofs)
        for tag, g, _ in items:
            d, v = fem.dirichlet_data(space, tag, g, t)
            vals[d] = v
        return all_dofs, vals[all_dofs]

    def velocity_dirichlet(self, t):
        return self._bc_values(self.U, self._u_bc, t)

    def head_dirichlet(self, t):
        return self._bc_values(self.H, self._phi_bc, t)

    # -- splitting ---------------------------------------------------------
    def split(self, vec):
        vec = np.asarray(vec)
        return vec[self.slices["u"]], vec[self.slices["p"]], vec[self.slices["phi"]]

    def join(self, u, p, phi):
        return np.concatenate([u, p, phi])

    def zero_state(self):
        return np.zeros(self.n)

    # -- loads ---------------------------------------------------------------
    def stokes_load(self, t):
        pr, ex = self.problem, self.exactness
        out = np.zeros(self.n_u)
        if pr.f1 is not None:
            out += fem.load_vector(self.U, pr.f1, t, exactness=ex)
        if pr.stokes_interface_load is not None and self.has_interface:
            out += fem.interface_load(self.U, pr.stokes_interface_load, t, exactness=ex)
        return out

    def darcy_load(self, t):
        pr, ex, g = self.problem, self.exactness, self.params.g
        out = np.zeros(self.n_phi)
        if pr.f2 is not None:
            out += g * fem.load_vector(self.H, pr.f2, t, exactness=ex)
        if pr.darcy_interface_load is not None and self.has_interface:
            out += g * fem.interface_load(self.H, pr.darcy_interface_load, t, exactness=ex)
        return out

    # -- implicit substeps ---------------------------------------------------
    def stokes_matrix(self, weight):
        top = (weight * self.M_f + self.A_f).tocsr()
        return sp.bmat([[top, self.B.T], [self.B, None]], format="csr")

    def _pressure_dofs(self):
        return np.array([self.n_u], dtype=np.int64) if self.pin_pressure else np.zeros(0, dtype=np.int64)

    def solve_stokes(self, weight, t, mass_rhs_u, phi_lagged):
        """Velocity and pressure from the Stokes substep."""
        rhs = np.concatenate([self.M_f @ mass_rhs_u + self.stokes_load(t), np.zeros(self.n_p)])
        if self.has_interface:
            rhs[: self.n_u] -= self.C_nf @ phi_lagged
        dofs, vals = self.velocity_dirichlet(t)
        pdofs = self._pressure_dofs()
        all_dofs = np.concatenate([dofs, pdofs])
        all_vals = np.concatenate([vals, np.zeros(len(pdofs))])

        def build():
            return fem.constrain_matrix(self.stokes_matrix(weight), all_dofs)

        fact = self._cache_f.get(("stokes", float(weight)), build)
        rhs = fem.lift_rhs(self.stokes_matrix(weight), rhs, all_dofs, all_vals)
        x = fact.solve(rhs)
        u, p = x[: self.n_u], x[self.n_u:]
        if self.pin_pressure:
            p = p - self.pressure_mean(p)
        return u, p

    def solve_darcy(self, weight, t, mass_rhs_phi, u_lagged):
        rhs = self.M_p @ mass_rhs_phi + self.darcy_load(t)
        if self.has_interface:
            rhs += self.C_fn @ u_lagged
        dofs, vals = self.head_dirichlet(t)
        mat = (weight * self.M_p + self.A_p).tocsr()
        fact = self._cache_p.get(("darcy", float(weight)), lambda: fem.constrain_matrix(mat, dofs))
        return fact.solve(fem.lift_rhs(mat, rhs, dofs, vals))

    def pressure_mean(self, p):
        ones = np.ones(self.n_p)
        m = fem.mass_matrix(self.Q, exactness=self.exactness)
        return float(ones @ (m @ p) / (ones @ (m @ ones)))

    # -- implicit-linear-evolution contract ----------------------------------
    def solve(self, weight, t, mass_rhs, lagged):
        ru, _, rphi = self.split(mass_rhs)
        lu, _, lphi = self.split(lagged)
        u, p = self.solve_stokes(weight, t, ru, lphi)
        phi = self.solve_darcy(weight, t, rphi, lu)
        return self.join(u, p, phi)

    def finalize(self, state, t):
        state = np.array(state, dtype=float, copy=True)
        du, vu = self.velocity_dirichlet(t)
        dh, vh = self.head_dirichlet(t)
        state[du] = vu
        state[self.slices["phi"].start + dh] = vh
        return state

    def field_norms(self, vec):
        u, p, phi = self.split(vec)
        return {
            "u": math.sqrt(max(u @ (self.mass_u @ u), 0.0)),
            "phi": math.sqrt(max(phi @ (self.mass_phi @ phi), 0.0)),
        }

    def residual(self, weight, t, mass_rhs, lagged, state):
        """Residuals of the two assembled substep systems at ``state`` (constrained rows skipped)."""
        ru, _, rphi = self.split(mass_rhs)
        lu, _, lphi = self.split(lagged)
        u, p, phi = self.split(state)
        rs = np.concatenate([self.M_f @ ru + self.stokes_load(t) - self.C_nf @ lphi, np.zeros(self.n_p)])
        rs -= self.stokes_matrix(weight) @ np.concatenate([u, p])
        rd = self.M_p @ rphi + self.darcy_load(t) + self.C_fn @ lu - (weight * self.M_p + self.A_p) @ phi
        du, _ = self.velocity_dirichlet(t)
        dh, _ = self.head_dirichlet(t)
        rs[du] = 0.0
        rd[dh] = 0.0
        if self.pin_pressure:
            rs[self.n_u] = 0.0
        return rs, rd

    # -- stationary coupled solve ------------------------------------------
    def stationary_solve(self, t, rate):
        """Monolithic solve of ``A x = F(t) - M rate`` with the constraints at ``t``.

        ``rate`` is a state-shaped time derivative. Used to build initial
        data that lies on the discrete solution manifold.
        """
        ru, _, rphi = self.split(rate)
        top = sp.hstack([self.A_f, self.B.T, self.C_nf])
        mid = sp.hstack([self.B, sp.csr_matrix((self.n_p, self.n_p)), sp.csr_matrix((self.n_p, self.n_phi))])
        bot = sp.hstack([-self.C_fn, sp.csr_matrix((self.n_phi, self.n_p)), self.A_p])
        mat = sp.vstack([top, mid, bot]).tocsr()
        rhs = np.concatenate([
            self.stokes_load(t) - self.M_f @ ru,
            np.zeros(self.n_p),
            self.darcy_load(t) - self.M_p @ rphi,
        ])
        du, vu = self.velocity_dirichlet(t)
        dh, vh = self.head_dirichlet(t)
        dofs = np.concatenate([du, self.slices["phi"].start + dh])
        vals = np.concatenate([vu, vh])
        if self.pin_pressure:
            dofs = np.append(dofs, self.n_u)
            vals = np.append(vals, 0.0)
        x = solve_direct(fem.constrain_matrix(mat, dofs), fem.lift_rhs(mat, rhs, dofs, vals))
        if self.pin_pressure:
            x[self.slices["p"]] -= self.pressure_mean(x[self.slices["p"]])
        return x

    # -- diagnostics ---------------------------------------------------------
    def interface_mass_flux(self, state) -> float:
        if not self.has_interface:
            return 0.0
        u, _, _ = self.split(state)
        return fem.interface_flux(self.U, u, exactness=self.exactness)

    def interpolate(self, u=None, p=None, phi=None):
        """Nodal interpolant of closed-form fields ``(x, y)`` into a state vector."""
        vu = self.U.interpolate(u) if u is not None else np.zeros(self.n_u)
        vp = self.Q.interpolate(p) if p is not None else np.zeros(self.n_p)
        vh = self.H.interpolate(phi) if phi is not None else np.zeros(self.n_phi)
        return self.join(vu, vp, vh)


def build_discrete_model(mesh, degrees=(2, 1, 2), params=None, problem=None) -> StokesDarcySystem:
    return StokesDarcySystem(mesh, params or PhysicalParams(), problem, degrees)


def decoupled_step(system: StokesDarcySystem, history: StepHistory, k_next: float, scheme="BDF2"):
    """Unfiltered substep results ``(u_hat, p_hat, phi_hat)`` for one step."""
    res = advance(system, SchemeKind.parse(scheme), history, k_next)
    return system.split(res.hat)


def energy_from_matrices(mass_u, grad_u, mass_phi, grad_phi_K, u_states, phi_states, tau_n, tau_prev,
                         nu=1.0, g=1.0, S=1.0) -> EnergyDiagnostics:
    """Energies E and F from three states per field (newest first) and step ratios.

    ``grad_u`` is the plain stiffness matrix and ``grad_phi_K`` the
    K-weighted one, so ``x @ grad_phi_K @ x`` is ``||K^{1/2} grad x||^2``.
    """
    b1, b2, _ = variable_step_coefficients(tau_n, tau_prev).beta
    c1, c2, _ = variable_step_coefficients(tau_n, tau_prev).gamma
    u0, u1, u2 = (np.asarray(v, dtype=float) for v in u_states[:3])
    f0, f1, f2 = (np.asarray(v, dtype=float) for v in phi_states[:3])

    def q(m, x):
        return float(x @ (m @ x))

    du0, du1 = u0 - u1, u1 - u2
    df0, df1 = f0 - f1, f1 - f2
    E = ((b1 + b2) / 2 * q(mass_u, du0) + b1 / 2 * q(mass_u, du1)
         + g * S * (b1 + b2) / 2 * q(mass_phi, df0) + g * S * b1 / 2 * q(mass_phi, df1))
    F = (nu / 2 * q(grad_u, u0) + nu * (c1 + c2) / 2 * q(grad_u, du0) + nu * c1 / 2 * q(grad_u, du1)
         + g / 2 * q(grad_phi_K, f0) + g * (c1 + c2) / 2 * q(grad_phi_K, df0) + g * c1 / 2 * q(grad_phi_K, df1))
    return EnergyDiagnostics(E, F)


def energy_functionals(system: StokesDarcySystem, history: StepHistory) -> EnergyDiagnostics:
    if len(history) < 4:
        raise ValueError("energy functionals need four time levels (three states plus one earlier time)")
    t = history.times
    tau_n = (t[0] - t[1]) / (t[1] - t[2])
    tau_prev = (t[1] - t[2]) / (t[2] - t[3])
    parts = [system.split(s) for s in history.states[:3]]
    pr = system.params
    return energy_from_matrices(
        system.mass_u, system.grad_u, system.mass_phi, system.grad_phi_K,
        [p[0] for p in parts], [p[2] for p in parts], tau_n, tau_prev, pr.nu, pr.g, pr.S,
    )
