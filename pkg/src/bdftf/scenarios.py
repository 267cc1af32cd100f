"""Scenario registry: each scenario turns a ``RunConfig`` into CSV/VTK artifacts and headline metrics."""

from __future__ import annotations

import json
import math
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .adaptivity import STEP_LOG_COLUMNS, AdaptiveAbort, AdaptiveConfig, integrate_adaptive
from .config import SCENARIOS, RunConfig
from .io import state_point_data, write_csv, write_vtk
from .linalg import SingularMatrixError
from .mesh import WellboreGeometry, build_rect_union, build_wellbore_domain
from .mms import (
    FLUID_RECT,
    POROUS_RECT,
    ConvergenceReport,
    cauchy_ratio,
    exact_initial_history,
    field_error,
    manufactured_problem,
    observed_order,
    step_schedule,
    trajectory_global_error,
)
from .model import PhysicalParams, ProblemData, StokesDarcySystem, energy_functionals
from .timeint import StepHistory, THEORY_RATIO_CAP
from .timeint.schemes import (
    SchemeKind,
    StepFailure,
    Trajectory,
    exact_history,
    integrate_fixed_schedule,
    scalar_decay_system,
)

TRAJECTORY_COLUMNS = ("step", "t", "k", "tau", "norm_u", "norm_phi")
CONVERGENCE_COLUMNS = ("resolution", "err_u", "rho_u", "err_phi", "rho_phi", "wall_seconds")
ENERGY_COLUMNS = ("t", "k", "E", "F")


class NumericalFailure(RuntimeError):
    """A solver or controller failure, tagged with the scenario that hit it."""

    def __init__(self, scenario: str, detail: str):
        super().__init__(f"{scenario}: {detail}")
        self.scenario = scenario


@dataclass
class ScenarioResult:
    scenario: str
    status: int = 0
    manifest: list = field(default_factory=list)
    metrics: dict = field(default_factory=dict)
    out_dir: Path | None = None

    def summary(self) -> dict:
        return {"scenario": self.scenario, "status": self.status, "metrics": self.metrics,
                "manifest": [str(p) for p in self.manifest]}

    def summary_line(self) -> str:
        return "SUMMARY " + json.dumps(_jsonable(self.summary()), sort_keys=True)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, Path):
        return str(obj)
    return obj


class _Outputs:
    def __init__(self, config: RunConfig):
        self.config = config
        self.dir = Path(config.out_dir or Path("runs") / config.scenario)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.files: list = []

    def csv(self, name, columns, rows):
        if self.config.csv:
            self.files.append(write_csv(self.dir / name, columns, rows))

    def vtk(self, name, mesh, data, title):
        if self.config.vtk:
            self.files.append(write_vtk(self.dir / name, mesh, data, title))

    def wall(self, seconds):
        return seconds if self.config.timing else None


def _params(config: RunConfig, **fallback) -> PhysicalParams:
    return PhysicalParams(
        nu=config.get("nu", fallback.get("nu")),
        g=config.get("g", fallback.get("g")),
        S=config.get("S", fallback.get("S")),
        K=config.get("K", fallback.get("K")),
        alpha_bjs=config.get("alpha_bjs", fallback.get("alpha_bjs")),
    )


def _degrees(config):
    return (config.degree_u, config.degree_p, config.degree_phi)


def _schemes(config, fallback):
    return [SchemeKind.parse(s) for s in (config.schemes or fallback)]


def _trajectory_rows(system, traj: Trajectory):
    rows = []
    t = traj.times
    for i, (ti, s) in enumerate(zip(t, traj.states)):
        k = t[i] - t[i - 1] if i > 0 else None
        tau = k / (t[i - 1] - t[i - 2]) if i > 1 else None
        norms = system.field_norms(s)
        rows.append({"step": i, "t": ti, "k": k, "tau": tau, "norm_u": norms.get("u"), "norm_phi": norms.get("phi")})
    return rows


def _initial_mode(config, auto):
    return auto if config.initial == "auto" else config.initial


# -- ode_orders ---------------------------------------------------------------------

def _ode_orders(config: RunConfig, out: _Outputs) -> dict:
    lam = config.values["lambda"]
    system = scalar_decay_system(lam)
    t0, T = config.t0, config.T
    ks = config.ks or tuple(config.get("k", 0.1) / 2**i for i in range(config.get("halvings", 5)))
    exact = lambda t: math.exp(lam * (t - t0))  # noqa: E731
    rows, orders = [], {}
    for scheme in _schemes(config, ("BDF2", "BDF2_TF", "BDF3", "BDF3_TF")):
        errs = []
        for k in ks:
            n_init = scheme.initial_states
            hist = exact_history(exact, [t0 + j * k for j in range(n_init)])
            n_steps = int(round((T - t0) / k)) - (n_init - 1)
            traj = integrate_fixed_schedule(system, scheme, lambda n, t, k=k: k, hist, n_steps=n_steps)
            errs.append(abs(float(traj.states[-1][0]) - exact(traj.times[-1])))
        for i, (k, e) in enumerate(zip(ks, errs)):
            rho = observed_order(errs[i - 1], e, ks[i - 1] / k) if i > 0 and e > 0 else None
            rows.append({"scheme": scheme.value, "k": k, "error": e, "order": rho})
        orders[scheme.value] = observed_order(errs[-2], errs[-1], ks[-2] / ks[-1]) if len(ks) > 1 else None
    out.csv("ode_orders.csv", ("scheme", "k", "error", "order"), rows)
    return {"orders": orders, "lambda": lam}


# -- convergence_2d -----------------------------------------------------------------

def _mms(config, n):
    return manufactured_problem(n, _degrees(config), _params(config))


def _run_constant(system, exact, scheme, k, t0, T, mode):
    n_init = scheme.initial_states
    hist = exact_initial_history(system, exact, [t0 + j * k for j in range(n_init)], mode)
    return integrate_fixed_schedule(system, scheme, lambda n, t: k, hist, T=T)


def _convergence_temporal(config, out):
    scheme = SchemeKind.parse(config.scheme)
    n = config.mesh_n
    system, exact = _mms(config, n)
    k0 = config.k
    ks = config.ks or tuple(k0 / 2**i for i in range(config.halvings))
    mode = _initial_mode(config, "projection")
    report = ConvergenceReport()
    finals = []
    for k in ks:
        start = time.perf_counter()
        traj = _run_constant(system, exact, scheme, k, config.t0, config.T, mode)
        eu = trajectory_global_error(system, traj, exact, "u")
        ep = trajectory_global_error(system, traj, exact, "phi")
        report.add(k, eu, ep, wall=out.wall(time.perf_counter() - start))
        finals.append(traj.states[-1])
    out.csv("convergence.csv", CONVERGENCE_COLUMNS, report.rows())
    metrics = {"scheme": scheme.value, "mesh_n": n, "ks": list(ks), "initial": mode,
               "err_u": report.err_u, "err_phi": report.err_phi}
    cauchy_rows = []
    for i in range(len(finals) - 2):
        a, b, c = (system.split(s) for s in finals[i:i + 3])
        ru = cauchy_ratio(a[0], b[0], c[0], system.mass_u)
        rp = cauchy_ratio(a[2], b[2], c[2], system.mass_phi)
        cauchy_rows.append({"k": ks[i], "rho_u": ru, "rho_phi": rp})
    if cauchy_rows:
        out.csv("cauchy.csv", ("k", "rho_u", "rho_phi"), cauchy_rows)
        metrics["cauchy_rho_u"] = cauchy_rows[-1]["rho_u"]
        metrics["cauchy_rho_phi"] = cauchy_rows[-1]["rho_phi"]
    if len(ks) >= 3:
        metrics["rho_u"], metrics["rho_phi"] = report.rho_u, report.rho_phi
    return metrics


def _convergence_spatial(config, out):
    scheme = SchemeKind.parse(config.scheme)
    k = config.get("k", 1 / 200)
    mode = _initial_mode(config, "interpolate")
    report = ConvergenceReport()
    for n in config.mesh_ns:
        start = time.perf_counter()
        system, exact = _mms(config, n)
        traj = _run_constant(system, exact, scheme, k, config.t0, config.T, mode)
        eu = trajectory_global_error(system, traj, exact, "u")
        ep = trajectory_global_error(system, traj, exact, "phi")
        report.add(1.0 / n, eu, ep, wall=out.wall(time.perf_counter() - start))
    out.csv("convergence.csv", CONVERGENCE_COLUMNS, report.rows())
    metrics = {"scheme": scheme.value, "k": k, "mesh_ns": list(config.mesh_ns), "err_u": report.err_u,
               "err_phi": report.err_phi}
    if len(config.mesh_ns) >= 3:
        metrics["rho_u"], metrics["rho_phi"] = report.rho_u, report.rho_phi
    elif len(config.mesh_ns) == 2:
        metrics["rho_u"] = report.pairwise_orders(report.err_u)[-1]
        metrics["rho_phi"] = report.pairwise_orders(report.err_phi)[-1]
    return metrics


def adaptive_config(config: RunConfig, eps: float) -> AdaptiveConfig:
    return AdaptiveConfig(
        eps=eps, gamma_hat=config.gamma_hat, gamma_check=config.gamma_check, max_growth=config.max_growth,
        tau_cap=config.tau_cap, k_min=config.k_min, k_max=config.k_max, k_initial=config.k_initial,
        max_consecutive_rejections=config.max_rejections, exponent=config.growth_exponent,
    )


def _convergence_adaptive(config, out):
    scheme = SchemeKind.parse(config.scheme)
    n = config.get("mesh_n", 16)
    system, exact = _mms(config, n)
    mode = _initial_mode(config, "interpolate")
    k0 = config.k_initial
    hist = exact_initial_history(system, exact, [config.t0 + j * k0 for j in range(scheme.initial_states)], mode)
    rows = []
    for eps in config.eps_list:
        start = time.perf_counter()
        res = integrate_adaptive(system, scheme, adaptive_config(config, eps), hist, config.T)
        eu = trajectory_global_error(system, res.trajectory, exact, "u")
        ep = trajectory_global_error(system, res.trajectory, exact, "phi")
        tag = f"{eps:.0e}".replace("+", "")
        out.csv(f"step_log_eps{tag}.csv", STEP_LOG_COLUMNS, res.step_log)
        rows.append({
            "eps": eps, "err_u": eu, "err_phi": ep, "mean_step": res.mean_accepted_step(),
            "accepted": len(res.accepted), "rejections": res.rejections,
            "max_estimate": res.max_accepted_estimate(), "wall_seconds": out.wall(time.perf_counter() - start),
        })
    out.csv("adaptive.csv", ("eps", "err_u", "err_phi", "mean_step", "accepted", "rejections", "max_estimate",
                             "wall_seconds"), rows)
    by_eps = sorted(rows, key=lambda r: -r["eps"])
    return {
        "scheme": scheme.value, "mesh_n": n, "rows": rows,
        "estimates_within_tolerance": all(r["max_estimate"] <= r["eps"] for r in rows),
        "err_u_monotone": all(a["err_u"] > b["err_u"] for a, b in zip(by_eps, by_eps[1:])),
        "mean_step_decreasing": all(a["mean_step"] > b["mean_step"] for a, b in zip(by_eps, by_eps[1:])),
    }


def _convergence_2d(config, out):
    return {"temporal": _convergence_temporal, "spatial": _convergence_spatial,
            "adaptive": _convergence_adaptive}[config.mode](config, out) | {"mode": config.mode}


# -- stability_decay ------------------------------------------------------------------

def _stability_decay(config, out):
    scheme = SchemeKind.parse(config.scheme)
    mesh = build_rect_union(FLUID_RECT, POROUS_RECT, config.mesh_n, config.mesh_n, config.mesh_n)
    system = StokesDarcySystem(mesh, _params(config), ProblemData(), _degrees(config))
    schedule = step_schedule(config.get("schedule", "k_n2"))
    n_steps = config.n_steps or 200
    rng = np.random.default_rng(config.seed)
    times = schedule.times(config.t0, scheme.initial_states)
    states = [system.finalize(rng.standard_normal(system.n), t) for t in times]
    hist = StepHistory(list(times), states)

    def size(s):
        nrm = system.field_norms(s)
        return nrm["u"] + nrm["phi"]

    initial = size(states[-1])
    energy_rows = []
    sizes = [size(s) for s in states]

    def on_step(n, res, history):
        sizes.append(size(res.state))
        if len(history) >= 4:
            e = energy_functionals(system, history)
            energy_rows.append({"t": res.t, "k": res.k, "E": e.E, "F": e.F})

    traj = integrate_fixed_schedule(system, scheme, schedule, hist, n_steps=n_steps, on_step=on_step)
    out.csv("trajectory.csv", TRAJECTORY_COLUMNS, _trajectory_rows(system, traj))
    out.csv("energy.csv", ENERGY_COLUMNS, energy_rows)
    ratios = np.diff(traj.times)
    ratios = ratios[1:] / ratios[:-1]
    growth = max(sizes) / initial if initial > 0 else float("nan")
    return {
        "scheme": scheme.value, "schedule": schedule.name, "steps": len(traj) - traj.n_initial,
        "max_growth": growth, "final_size": sizes[-1], "initial_size": initial,
        "energy_finite": all(math.isfinite(r["E"]) for r in energy_rows),
        "max_ratio": float(ratios.max()), "ratios_above_cap": int(np.sum(ratios > THEORY_RATIO_CAP)),
    }


# -- schedule_sweep -------------------------------------------------------------------

def _schedule_sweep(config, out):
    scheme = SchemeKind.parse(config.scheme)
    system, exact = _mms(config, config.mesh_n)
    n_steps = config.n_steps or 40
    mode = _initial_mode(config, "interpolate")
    rows = []
    for name in config.schedules:
        sched = step_schedule(name)
        times = sched.times(config.t0, scheme.initial_states)
        hist = exact_initial_history(system, exact, times, mode)
        traj = integrate_fixed_schedule(system, scheme, sched, hist, n_steps=n_steps)
        t_end, s_end = traj.times[-1], traj.states[-1]
        eu, ru = field_error(system, s_end, exact, t_end, "u")
        ep, rp = field_error(system, s_end, exact, t_end, "phi")
        k = np.diff(traj.times)
        tau = k[1:] / k[:-1]
        above = int(np.sum(tau > THEORY_RATIO_CAP))
        if above:
            warnings.warn(f"schedule {name}: {above} step ratios exceed {THEORY_RATIO_CAP}", RuntimeWarning,
                          stacklevel=2)
        out.csv(f"trajectory_{name}.csv", TRAJECTORY_COLUMNS, _trajectory_rows(system, traj))
        rows.append({"schedule": name, "steps": len(traj) - traj.n_initial, "t_final": t_end,
                     "rel_err_u": eu / ru, "rel_err_phi": ep / rp, "max_ratio": float(tau.max()),
                     "ratios_above_cap": above})
    out.csv("schedule_sweep.csv", ("schedule", "steps", "t_final", "rel_err_u", "rel_err_phi", "max_ratio",
                                   "ratios_above_cap"), rows)
    return {"scheme": scheme.value, "rows": rows}


# -- wellbore_demo ----------------------------------------------------------------------

def wellbore_problem(geometry: WellboreGeometry, phi_dirichlet: float = 1e4, left_inflow: str = "literal"):
    """Inflow on injection tops, free outflow on the production top, fixed head outside."""
    left = [s for s in geometry.slots if s[2] == "injection"]
    (l0, l1), (r0, r1) = (left[0][0], left[0][1]), (left[-1][0], left[-1][1])

    def inflow(x, y, t):
        x = np.asarray(x, dtype=float)
        if left_inflow == "literal":
            vl = -4096.0 * (l1 - x)
        else:
            vl = -4096.0 * (x - l0) * (l1 - x)
        vr = -4096.0 * (x - r0) * (r1 - x)
        mid = 0.5 * (l1 + r0)
        return np.array([np.zeros_like(x), np.where(x < mid, vl, vr)])

    # inflow first so no-slip walls win at shared corner nodes
    return ProblemData(
        velocity_bc={"fluid_inflow": inflow, "fluid_wall": None},
        head_bc={"porous_dirichlet": lambda x, y, t: np.full_like(np.asarray(x, dtype=float), phi_dirichlet)},
    )


def bootstrap_history(system, scheme: SchemeKind, schedule, t0: float, substeps: int) -> StepHistory:
    """Startup states from backward Euler substeps, starting from rest."""
    warnings.warn(f"bootstrapping {scheme.initial_states - 1} startup steps with {substeps} backward Euler "
                  "substeps each", RuntimeWarning, stacklevel=2)
    times = schedule.times(t0, scheme.initial_states)
    x = system.finalize(system.zero_state(), t0)
    states = [x]
    for a, b in zip(times[:-1], times[1:]):
        dt = (b - a) / substeps
        for j in range(1, substeps + 1):
            t = a + j * dt
            x = system.solve(1.0 / dt, t, x / dt, x)
        states.append(x)
    return StepHistory(list(times), states)


def _wellbore_demo(config, out):
    geometry = WellboreGeometry()
    mesh = build_wellbore_domain(geometry, config.target_h)
    params = _params(config, nu=1e-3, g=1.0, S=1.0, K=0.1, alpha_bjs=1.0)
    problem = wellbore_problem(geometry, config.phi_dirichlet, config.left_inflow)
    schedule = step_schedule(config.get("schedule", "k_n5"))
    metrics = {"schedule": schedule.name, "n_vertices": mesh.n_vertices, "T": config.T, "schemes": {}}
    for scheme in _schemes(config, ("BDF2", "BDF2_TF", "BDF3")):
        system = StokesDarcySystem(mesh, params, problem, _degrees(config))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            hist = bootstrap_history(system, scheme, schedule, config.t0, config.bootstrap_substeps)
        name = scheme.value.lower()
        log, energy = [], []
        frames = 0

        def frame(index, t, state):
            nonlocal frames
            out.vtk(f"{name}_frame{index:05d}.vtk", mesh, state_point_data(system, state), f"{scheme.value} t={t:.6g}")
            frames += 1

        frame(0, hist.times[-1], hist.states[-1])

        def on_step(n, res, history):
            tau = res.k / history.step(1)
            log.append({"step_index": n, "t": res.t, "k": res.k, "tau": tau, "est_u": float("nan"),
                        "est_phi": float("nan"), "status": "accepted"})
            if len(history) >= 4:
                e = energy_functionals(system, history)
                energy.append({"t": res.t, "k": res.k, "E": e.E, "F": e.F})
            if n % config.vtk_every == 0:
                frame(n, res.t, res.state)

        traj = integrate_fixed_schedule(system, scheme, schedule, hist, T=config.T,
                                        n_steps=config.n_steps or None, on_step=on_step)
        last = len(traj) - 1
        if last % config.vtk_every:
            frame(last, traj.times[-1], traj.states[-1])
        out.csv(f"{name}_step_log.csv", STEP_LOG_COLUMNS, log)
        out.csv(f"{name}_energy.csv", ENERGY_COLUMNS, energy)
        vmax = max(float(np.abs(system.split(s)[0]).max()) for s in traj.states)
        metrics["schemes"][scheme.value] = {
            "steps": len(traj) - traj.n_initial, "t_final": traj.times[-1], "max_velocity": vmax,
            "finite": bool(np.isfinite(vmax)), "vtk_frames": frames,
            "interface_flux": system.interface_mass_flux(traj.states[-1]),
        }
    return metrics


# -- registry -------------------------------------------------------------------------

REGISTRY = {
    "convergence_2d": _convergence_2d,
    "stability_decay": _stability_decay,
    "ode_orders": _ode_orders,
    "wellbore_demo": _wellbore_demo,
    "schedule_sweep": _schedule_sweep,
}
assert tuple(REGISTRY) == SCENARIOS


def run_scenario(config: RunConfig) -> ScenarioResult:
    """Run one scenario, write its artifacts plus ``summary.json``.

    Solver breakdowns are re-raised as ``NumericalFailure`` carrying the scenario name.
    """
    out = _Outputs(config)
    try:
        metrics = REGISTRY[config.scenario](config, out)
    except (StepFailure, AdaptiveAbort, SingularMatrixError) as exc:
        raise NumericalFailure(config.scenario, str(exc)) from exc
    result = ScenarioResult(config.scenario, 0, list(out.files), metrics, out.dir)
    summary = out.dir / "summary.json"
    summary.write_text(json.dumps(_jsonable(result.summary()), indent=2, sort_keys=True) + "\n")
    result.manifest.append(summary)
    missing = [p for p in result.manifest if not Path(p).exists()]
    if missing:
        raise RuntimeError(f"manifest lists missing files: {missing}")
    return result
