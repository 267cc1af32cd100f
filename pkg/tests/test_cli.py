import json

import pytest

from bdftf.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, main
from bdftf.config import SCENARIOS, parse_config
from bdftf.scenarios import run_scenario


def test_list_scenarios(capsys):
    assert main(["list-scenarios"]) == EXIT_OK
    assert capsys.readouterr().out.split() == list(SCENARIOS)


def test_validate_config(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("scenario=ode_orders\nnu=0.5\n")
    assert main(["validate-config", str(cfg)]) == EXIT_OK
    cfg.write_text("scenario=ode_orders\nbogus=1\n")
    assert main(["validate-config", str(cfg)]) == EXIT_CONFIG
    assert "line 2" in capsys.readouterr().err


def test_run_ode_orders(tmp_path, capsys):
    out = tmp_path / "ode"
    assert main(["run", "ode_orders", "--set", f"out_dir={out}"]) == EXIT_OK
    line = [s for s in capsys.readouterr().out.splitlines() if s.startswith("SUMMARY ")][0]
    summary = json.loads(line[len("SUMMARY "):])
    orders = summary["metrics"]["orders"]
    for scheme, p in (("BDF2", 2), ("BDF2_TF", 3), ("BDF3", 3), ("BDF3_TF_CONST", 4)):
        assert orders[scheme] == pytest.approx(p, abs=0.2)
    assert all((tmp_path / "ode" / f).exists() for f in ("ode_orders.csv", "summary.json"))


def test_config_errors_exit_2(tmp_path):
    assert main(["run"]) == EXIT_CONFIG
    assert main(["run", "ode_orders", "--config", str(tmp_path / "missing.cfg")]) == EXIT_CONFIG
    assert main(["run", "ode_orders", "--set", "nu=-1"]) == EXIT_CONFIG


def test_numerical_failure_exit_3(tmp_path, capsys):
    args = ["run", "convergence_2d", "--set", "mode=adaptive", "--set", "mesh_n=2", "--set", "eps_list=1e-14",
            "--set", "max_rejections=2", "--set", f"out_dir={tmp_path}"]
    assert main(args) == EXIT_NUMERICAL
    assert "convergence_2d" in capsys.readouterr().err


def test_reproducible_csv(tmp_path):
    outs = []
    for name in ("a", "b"):
        cfg = parse_config("", [f"out_dir={tmp_path / name}", "mesh_n=2", "n_steps=5", "schedules=k_n1,k_n2"],
                           "schedule_sweep")
        res = run_scenario(cfg)
        outs.append({p.name: p.read_bytes() for p in res.manifest if p.suffix == ".csv"})
    assert outs[0] == outs[1] and outs[0]


def test_stability_scenario_small(tmp_path):
    cfg = parse_config("", [f"out_dir={tmp_path}", "mesh_n=2", "n_steps=20", "vtk=false"], "stability_decay")
    res = run_scenario(cfg)
    assert res.metrics["energy_finite"] and res.metrics["max_growth"] < 10
    assert all(p.exists() for p in res.manifest)


def test_wellbore_scenario_small(tmp_path):
    cfg = parse_config("", [f"out_dir={tmp_path}", "target_h=1.0", "T=0.05", "schemes=BDF2_TF", "vtk_every=2",
                            "bootstrap_substeps=2"], "wellbore_demo")
    res = run_scenario(cfg)
    m = res.metrics["schemes"]["BDF2_TF"]
    assert m["finite"] and m["t_final"] == pytest.approx(0.05)
    assert any(p.suffix == ".vtk" for p in res.manifest)
