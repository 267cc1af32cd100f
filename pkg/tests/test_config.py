import pytest

from bdftf.config import KEYS, ConfigError, parse_assignments, parse_config


def test_empty_config_needs_scenario():
    with pytest.raises(ConfigError, match="scenario missing"):
        parse_config("")


def test_defaults_and_scenario_from_cli():
    cfg = parse_config("", scenario="ode_orders")
    assert cfg.scenario == "ode_orders"
    assert cfg.nu == 1.0 and cfg.scheme == "BDF2_TF" and cfg.tau_cap is None


def test_values_and_comments():
    cfg = parse_config("# comment\nnu=1e-3  # viscosity\n\nscheme = bdf3\nK=2,0.5,0.5,1\ntau_cap=theory\n",
                       scenario="ode_orders")
    assert cfg.nu == 0.001
    assert cfg.scheme == "BDF3"
    assert cfg.K == (2.0, 0.5, 0.5, 1.0)
    assert cfg.tau_cap == 1.0315
    assert cfg.explicit("nu") and not cfg.explicit("g")


def test_overrides_win():
    cfg = parse_config("scenario=ode_orders\nnu=2", overrides=["nu=3"])
    assert cfg.nu == 3.0


@pytest.mark.parametrize("text,line", [
    ("nu=1\nfoo=2", 2),
    ("scenario=ode_orders\n\nnu=abc", 3),
    ("nu=-1", 1),
    ("just words", 1),
    ("scheme=RK4", 1),
    ("csv=maybe", 1),
])
def test_errors_carry_line_numbers(text, line):
    with pytest.raises(ConfigError) as info:
        parse_config(text, scenario="ode_orders")
    assert info.value.line == line
    assert f"line {line}" in str(info.value)


@pytest.mark.parametrize("text", ["k_min=1\nk_max=0.5", "T=0.5\nt0=1", "K=1,2,0,1", "schedule=nope",
                                  "degree_u=4", "gamma_check=2"])
def test_constraint_violations(text):
    with pytest.raises(ConfigError):
        parse_config(text, scenario="ode_orders")


def test_unknown_scenario():
    with pytest.raises(ConfigError):
        parse_config("", scenario="nope")


def test_every_default_parses_back():
    for key, (parser, default, _) in KEYS.items():
        if default is None or isinstance(default, tuple):
            continue
        assert parse_assignments([f"{key}={default}"])[key] == parser(str(default))
