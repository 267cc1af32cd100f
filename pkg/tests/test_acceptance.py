"""Acceptance criteria, one test each; a pass/fail line per criterion is printed in the terminal summary."""

import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from bdftf.config import parse_config
from bdftf.scenarios import run_scenario
from bdftf.timeint import ratio_filter_weights, time_filter, variable_step_coefficients

pytestmark = pytest.mark.acceptance


@pytest.fixture
def report(record_property):
    def rec(n, detail):
        record_property("criterion", n)
        record_property("detail", detail)
        print(f"criterion {n}: {detail}")
    return rec


def run(scenario, tmp_path, *sets):
    cfg = parse_config("", [f"out_dir={tmp_path / scenario}", "vtk=false", *sets], scenario)
    return run_scenario(cfg)


def test_criterion_1_coefficients(report):
    c = variable_step_coefficients(1.0, 1.0)
    checks = {
        "sigma": np.allclose(c.sigma, (1, 2, 1), atol=1e-14),
        "beta": np.allclose(c.beta, (1 / 3, 7 / 6, 11 / 6), atol=1e-14),
        "gamma": np.allclose(c.gamma, (2 / 9, 4 / 9, 2 / 9), atol=1e-14),
        "alpha": abs(c.alpha + 2 / 11) < 1e-14,
    }
    b1, b2, b3 = c.beta
    checks["bdf3"] = np.allclose(6 * np.array([b3, -b3 - b2, b2 + b1, -b1]), [11, -18, 9, -2], atol=1e-13)
    checks["filter4"] = np.allclose(ratio_filter_weights(1.0, 1.0),
                                    np.array([1, 0, 0, 0]) - 2 / 11 * np.array([1, -3, 3, -1]), atol=1e-14)
    t = [4.0, 3.0, 2.0, 1.0, 0.0]
    w5 = [time_filter(1.0 * (i == 0), t, [1.0 * (i == j) for j in range(1, 5)], 3) for i in range(5)]
    checks["filter5"] = np.allclose(w5, np.array([1, 0, 0, 0, 0]) - 3 / 25 * np.array([1, -4, 6, -4, 1]),
                                    atol=1e-14)
    report(1, " ".join(f"{k}={'ok' if v else 'BAD'}" for k, v in checks.items()))
    assert all(checks.values())


def test_criterion_2_ode_orders(tmp_path, report):
    start = time.perf_counter()
    res = run("ode_orders", tmp_path, "k=0.1", "halvings=5")
    wall = time.perf_counter() - start
    orders = res.metrics["orders"]
    want = {"BDF2": (2.0, 0.2), "BDF2_TF": (3.0, 0.3), "BDF3": (3.0, 0.3), "BDF3_TF_CONST": (4.0, 0.4)}
    report(2, " ".join(f"{k}={v:.3f}" for k, v in orders.items()) + f" ({wall:.1f}s)")
    for name, (target, tol) in want.items():
        assert abs(orders[name] - target) <= tol
    assert wall < 5


@pytest.mark.parametrize("scheme,lo,hi", [("BDF2", 3, 5), ("BDF2_TF", 6, 10), ("BDF3_TF", 12, 20)])
def test_criterion_3_temporal_cauchy(tmp_path, report, scheme, lo, hi):
    start = time.perf_counter()
    res = run("convergence_2d", tmp_path, "mode=temporal", f"scheme={scheme}", "mesh_n=16", "k=0.1",
              "halvings=3", "initial=projection")
    rho = res.metrics["cauchy_rho_u"]
    report(3, f"{scheme} rho_v={rho:.3f} in [{lo}, {hi}] ({time.perf_counter() - start:.1f}s)")
    assert lo <= rho <= hi


def test_criterion_4_spatial_order(tmp_path, report):
    start = time.perf_counter()
    res = run("convergence_2d", tmp_path, "mode=spatial", "scheme=BDF2_TF", "k=0.005", "mesh_ns=4,8,16")
    rows = [r for r in _read(res, "convergence.csv")]
    ru = [float(r["rho_u"]) for r in rows[1:]]
    rp = [float(r["rho_phi"]) for r in rows[1:]]
    wall = time.perf_counter() - start
    report(4, f"orders u={['%.3f' % x for x in ru]} phi={['%.3f' % x for x in rp]} ({wall:.0f}s)")
    assert min(ru + rp) >= 2.7
    assert wall < 300


def _read(res, name):
    from bdftf.io import read_csv

    return read_csv(next(p for p in res.manifest if Path(p).name == name))


@pytest.mark.parametrize("scheme", ["BDF2", "BDF2_TF", "BDF3"])
def test_criterion_5_adaptive(tmp_path, report, scheme):
    start = time.perf_counter()
    res = run("convergence_2d", tmp_path, "mode=adaptive", f"scheme={scheme}", "mesh_n=16",
              "eps_list=1e-3,1e-4,1e-5", "k_initial=0.01")
    m = res.metrics
    errs = [r["err_u"] for r in m["rows"]]
    steps = [r["mean_step"] for r in m["rows"]]
    report(5, f"{scheme} err_u={['%.2e' % e for e in errs]} mean_k={['%.2e' % s for s in steps]} "
              f"rejections={[r['rejections'] for r in m['rows']]} ({time.perf_counter() - start:.0f}s)")
    assert m["estimates_within_tolerance"]
    assert m["err_u_monotone"]
    assert m["mean_step_decreasing"]


def test_criterion_6_stability(tmp_path, report):
    res = run("stability_decay", tmp_path, "scheme=BDF2_TF", "schedule=k_n2", "n_steps=200", "mesh_n=8",
              "seed=0")
    m = res.metrics
    report(6, f"steps={m['steps']} max growth={m['max_growth']:.3f} energy finite={m['energy_finite']} "
              f"max ratio={m['max_ratio']:.4f}")
    assert m["steps"] == 200
    assert m["max_growth"] <= 10
    assert m["energy_finite"]


def test_criterion_7_schedules(tmp_path, report):
    with pytest.warns(RuntimeWarning):
        res = run("schedule_sweep", tmp_path, "scheme=BDF2_TF", "schedules=k_n1,k_n2,k_n3", "n_steps=40",
                  "mesh_n=8")
    rows = res.metrics["rows"]
    report(7, " ".join(f"{r['schedule']}: steps={r['steps']} u={r['rel_err_u']:.2e} phi={r['rel_err_phi']:.2e}"
                       for r in rows))
    for r in rows:
        assert r["steps"] == 40
        assert max(r["rel_err_u"], r["rel_err_phi"]) < 1e-2


def test_criterion_8_wellbore(tmp_path, report):
    cfg = parse_config("", [f"out_dir={tmp_path / 'well'}", "schedule=k_n5", "T=1", "schemes=BDF2,BDF2_TF,BDF3"],
                       "wellbore_demo")
    res = run_scenario(cfg)
    schemes = res.metrics["schemes"]
    report(8, " ".join(f"{k}: steps={v['steps']} max|u|={v['max_velocity']:.3g} frames={v['vtk_frames']}"
                       for k, v in schemes.items()))
    assert set(schemes) == {"BDF2", "BDF2_TF", "BDF3"}
    for name, v in schemes.items():
        assert v["finite"] and v["t_final"] == pytest.approx(1.0)
        assert any(Path(p).name.startswith(name.lower() + "_frame") for p in res.manifest)
        assert any(Path(p).name == f"{name.lower()}_step_log.csv" for p in res.manifest)


def test_criterion_9_property_suites(report):
    here = Path(__file__).parent
    targets = [str(here / "test_differences.py"), str(here / "test_coefficients.py"),
               str(here / "test_adaptivity.py") + "::test_controller_deterministic_and_consistent"]
    start = time.perf_counter()
    proc = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", *targets],
                          capture_output=True, text=True, cwd=here.parent)
    wall = time.perf_counter() - start
    tail = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr[-200:]
    report(9, f"{tail} ({wall:.1f}s)")
    assert proc.returncode == 0
    assert wall < 60


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
