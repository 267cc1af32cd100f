"""Variable-step BDF2/BDF3 schemes, time filters and their coefficient algebra."""

from .coefficients import THEORY_RATIO_CAP, VariableStepCoefficients, ratio_filter_weights, variable_step_coefficients
from .differences import (
    divided_difference,
    eta_factor,
    filter_increment,
    lagrange_extrapolate,
    ratio_filter,
    reconstruct_hat,
    sigma_extrapolate,
    time_filter,
)
from .history import StepHistory
from .schemes import (
    LinearODESystem,
    SchemeKind,
    StepFailure,
    StepResult,
    Trajectory,
    advance,
    exact_history,
    implicit_weights,
    integrate_fixed_schedule,
    lagged_interface_data,
    scalar_decay_system,
)
