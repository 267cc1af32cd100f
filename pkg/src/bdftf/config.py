"""Flat ``key=value`` run configuration with line-numbered diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .timeint.coefficients import THEORY_RATIO_CAP
from .timeint.schemes import SchemeKind

SCENARIOS = ("convergence_2d", "stability_decay", "ode_orders", "wellbore_demo", "schedule_sweep")


class ConfigError(ValueError):
    def __init__(self, message, line=None, source="config"):
        where = f"{source} line {line}: " if line is not None else ""
        super().__init__(where + message)
        self.line = line


# -- value parsers --------------------------------------------------------------

def _float(s):
    v = float(s)
    if not math.isfinite(v):
        raise ValueError("must be finite")
    return v


def _pos_float(s):
    v = _float(s)
    if v <= 0:
        raise ValueError("must be positive")
    return v


def _nonneg_float(s):
    v = _float(s)
    if v < 0:
        raise ValueError("must be non-negative")
    return v


def _pos_int(s):
    v = int(s)
    if v < 1:
        raise ValueError("must be a positive integer")
    return v


def _nonneg_int(s):
    v = int(s)
    if v < 0:
        raise ValueError("must be a non-negative integer")
    return v


def _bool(s):
    low = s.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected true/false")


def _choice(*options):
    def parse(s):
        if s not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return s
    return parse


def _scheme(s):
    return SchemeKind.parse(s).value


def _schemes(s):
    items = [x.strip() for x in s.split(",") if x.strip()]
    if not items:
        raise ValueError("empty scheme list")
    return tuple(SchemeKind.parse(x).value for x in items)


def _pos_floats(s):
    vals = tuple(_pos_float(x) for x in s.split(",") if x.strip())
    if not vals:
        raise ValueError("empty list")
    return vals


def _pos_ints(s):
    vals = tuple(_pos_int(x) for x in s.split(",") if x.strip())
    if not vals:
        raise ValueError("empty list")
    return vals


def _names(s):
    vals = tuple(x.strip() for x in s.split(",") if x.strip())
    if not vals:
        raise ValueError("empty list")
    return vals


def _tensor(s):
    vals = [_float(x) for x in s.split(",")]
    if len(vals) == 1:
        if vals[0] <= 0:
            raise ValueError("scalar conductivity must be positive")
        return vals[0]
    if len(vals) != 4:
        raise ValueError("K takes one value or four (Kxx,Kxy,Kyx,Kyy)")
    return tuple(vals)


def _tau_cap(s):
    low = s.strip().lower()
    if low in ("none", "off", ""):
        return None
    if low == "theory":
        return THEORY_RATIO_CAP
    return _pos_float(s)


def _str(s):
    if not s:
        raise ValueError("must not be empty")
    return s


# key -> (parser, default, description)
KEYS = {
    "scenario": (_choice(*SCENARIOS), None, "scenario to run"),
    "scheme": (_scheme, "BDF2_TF", "time integrator: BDF2, BDF2_TF, BDF3, BDF3_TF"),
    "schemes": (_schemes, None, "comma list of schemes for multi-scheme scenarios"),
    "mode": (_choice("temporal", "spatial", "adaptive"), "temporal", "convergence_2d study type"),
    "mesh_n": (_pos_int, 8, "cells per side of each unit box"),
    "mesh_ns": (_pos_ints, (4, 8, 16), "mesh sequence for spatial studies"),
    "degree_u": (_pos_int, 2, "velocity degree"),
    "degree_p": (_pos_int, 1, "pressure degree"),
    "degree_phi": (_pos_int, 2, "head degree"),
    "nu": (_pos_float, 1.0, "kinematic viscosity"),
    "g": (_pos_float, 1.0, "gravitational acceleration"),
    "S": (_pos_float, 1.0, "specific storage"),
    "K": (_tensor, 1.0, "hydraulic conductivity (scalar or Kxx,Kxy,Kyx,Kyy)"),
    "alpha_bjs": (_nonneg_float, 1.0, "slip coefficient"),
    "t0": (_float, 0.0, "initial time"),
    "T": (_pos_float, 1.0, "final time"),
    "k": (_pos_float, 0.1, "base step size"),
    "ks": (_pos_floats, None, "explicit list of step sizes"),
    "halvings": (_pos_int, 3, "number of step sizes k, k/2, ... in temporal studies"),
    "schedule": (_str, None, "step schedule: k_n1, k_n2, k_n3, k_n5 or constant(<k>)"),
    "schedules": (_names, ("k_n1", "k_n2", "k_n3"), "schedules for schedule_sweep"),
    "n_steps": (_nonneg_int, 0, "number of steps (0: run to T)"),
    "initial": (_choice("auto", "interpolate", "projection"), "auto", "initial data for manufactured runs"),
    "eps": (_pos_float, 1e-4, "adaptive tolerance"),
    "eps_list": (_pos_floats, (1e-3, 1e-4, 1e-5), "tolerances for adaptive studies"),
    "gamma_hat": (_pos_float, 1.0, "growth safety factor"),
    "gamma_check": (_pos_float, 0.5, "rejection safety factor"),
    "max_growth": (_pos_float, 2.0, "largest growth factor theta"),
    "tau_cap": (_tau_cap, None, "cap on step ratio: none, theory (1.0315) or a number"),
    "k_min": (_pos_float, 1e-8, "smallest admissible step"),
    "k_max": (_pos_float, 0.5, "largest admissible step"),
    "k_initial": (_pos_float, 0.01, "starting step of adaptive runs"),
    "max_rejections": (_pos_int, 30, "consecutive rejections before aborting"),
    "growth_exponent": (_choice("cube_root", "order"), "cube_root", "controller exponent"),
    "lambda": (_float, -1.0, "decay rate of the scalar test equation"),
    "seed": (_nonneg_int, 0, "random seed"),
    "target_h": (_pos_float, 0.25, "wellbore mesh size"),
    "left_inflow": (_choice("literal", "symmetric"), "literal", "left injection profile variant"),
    "phi_dirichlet": (_float, 1e4, "wellbore head on the outer porous boundary"),
    "bootstrap_substeps": (_pos_int, 20, "backward Euler substeps per startup step"),
    "out_dir": (_str, None, "output directory (default runs/<scenario>)"),
    "csv": (_bool, True, "write CSV files"),
    "vtk": (_bool, True, "write VTK frames"),
    "vtk_every": (_pos_int, 10, "write a VTK frame every n steps"),
    "timing": (_bool, False, "record wall-clock seconds (makes CSVs run-dependent)"),
}


@dataclass(frozen=True)
class RunConfig:
    values: dict = field(default_factory=dict)

    def __getattr__(self, name):
        vals = object.__getattribute__(self, "values")
        if name in vals:
            return vals[name]
        raise AttributeError(name)

    def with_values(self, **kw) -> "RunConfig":
        v = dict(self.values)
        v.update(kw)
        return replace(self, values=v)

    def get(self, key, fallback=None):
        """Value of ``key`` if the user set it, otherwise ``fallback`` (or the global default)."""
        if self.explicit(key) or fallback is None:
            return self.values[key]
        return fallback

    def explicit(self, key) -> bool:
        return key in self.values.get("_explicit", ())


def defaults() -> dict:
    return {k: entry[1] for k, entry in KEYS.items()}


def parse_assignments(lines, source="config") -> dict:
    """Parse ``key=value`` lines into typed values, reporting line numbers."""
    out = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected key=value, got {line!r}", lineno, source)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"unknown key {key!r}", lineno, source)
        try:
            out[key] = KEYS[key][0](value)
        except ValueError as exc:
            raise ConfigError(f"bad value {value!r} for {key}: {exc}", lineno, source) from None
    return out


def _check(values):
    if values.get("scenario") is None:
        raise ConfigError("scenario missing")
    if values["k_min"] >= values["k_max"]:
        raise ConfigError("k_min must be smaller than k_max")
    if not 0 < values["gamma_check"] < 1 <= values["gamma_hat"]:
        raise ConfigError("safety factors must satisfy 0 < gamma_check < 1 <= gamma_hat")
    if values["T"] <= values["t0"]:
        raise ConfigError("T must exceed t0")
    for key in ("degree_u", "degree_p", "degree_phi"):
        if values[key] > 3:
            raise ConfigError(f"{key} must be 1, 2 or 3")
    if values["schedule"] is not None:
        from .mms import step_schedule

        try:
            step_schedule(values["schedule"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    K = values["K"]
    if isinstance(K, tuple):
        import numpy as np

        Km = np.array(K).reshape(2, 2)
        if not np.allclose(Km, Km.T) or np.linalg.eigvalsh(Km).min() <= 0:
            raise ConfigError("K must be symmetric positive definite")


def parse_config(text: str = "", overrides=(), scenario=None) -> RunConfig:
    """Defaults, then file text, then ``--set`` overrides, then the CLI scenario."""
    values = defaults()
    explicit = set()
    parsed = parse_assignments(text.splitlines())
    values.update(parsed)
    explicit.update(parsed)
    parsed = parse_assignments(list(overrides), source="--set")
    values.update(parsed)
    explicit.update(parsed)
    if scenario is not None:
        if scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {scenario!r}; known: {', '.join(SCENARIOS)}")
        values["scenario"] = scenario
    _check(values)
    values["_explicit"] = frozenset(explicit)
    return RunConfig(values)


def describe_keys() -> str:
    return "\n".join(f"{k} = {v[1]!r}  # {v[2]}" for k, v in KEYS.items())


__all__ = ["ConfigError", "KEYS", "RunConfig", "SCENARIOS", "defaults", "describe_keys", "parse_assignments",
           "parse_config"]

