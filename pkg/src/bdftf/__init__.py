"""Decoupled, time-filtered variable-step BDF solvers for the unsteady Stokes-Darcy problem."""

from .adaptivity import AdaptiveConfig, controller_decide, error_estimators, integrate_adaptive
from .config import ConfigError, RunConfig, parse_config
from .mesh import CoupledMesh, WellboreGeometry, build_rect_union, build_wellbore_domain
from .mms import ExactSolution2D, manufactured_problem, step_schedule
from .model import PhysicalParams, ProblemData, StokesDarcySystem, build_discrete_model
from .scenarios import ScenarioResult, run_scenario
from .timeint import SchemeKind, StepHistory, advance, integrate_fixed_schedule, variable_step_coefficients

__all__ = [
    "AdaptiveConfig", "ConfigError", "CoupledMesh", "ExactSolution2D", "PhysicalParams", "ProblemData",
    "RunConfig", "ScenarioResult", "SchemeKind", "StepHistory", "StokesDarcySystem", "WellboreGeometry",
    "advance", "build_discrete_model", "build_rect_union", "build_wellbore_domain", "controller_decide",
    "error_estimators", "integrate_adaptive", "integrate_fixed_schedule", "manufactured_problem",
    "parse_config", "run_scenario", "step_schedule", "variable_step_coefficients",
]
