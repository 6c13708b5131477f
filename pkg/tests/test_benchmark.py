"""Benchmark family, centralized oracle, experiment driver, and CLI."""

from __future__ import annotations

import json
import math
import os

import numpy as np
import pytest

from saddlenet.benchmark import (
    BenchmarkInstance,
    ConfigError,
    ExperimentConfig,
    dual_radius_formula,
    fit_loglog_slope,
    lagrangian_saddle,
    oracle_solve,
    plateau_level,
    random_instance,
    run_benchmark,
    to_separable,
)
from saddlenet.cli import main
from saddlenet.constrained import build_lagrangian_saddle
from saddlenet.dynamics import DoublingTrick, RunTrace, run
from saddlenet.graph import DigraphSequence, complete_digraph

scipy_opt = pytest.importorskip("scipy.optimize")


def test_random_instance_deterministic_and_feasible():
    a = random_instance(8, seed=5)
    b = random_instance(8, seed=5)
    assert np.array_equal(a.c, b.c) and np.array_equal(a.d, b.d) and a.b == b.b
    assert a.b == pytest.approx(0.8)
    assert np.all(a.c > 0.0) and np.all(a.c <= 1.0)
    assert a.slater_margin > 0.0
    other = random_instance(8, seed=6)
    assert not np.array_equal(a.c, other.c)


def test_oracle_matches_scipy_inner_minimizer():
    inst = random_instance(5, seed=3)
    sol = oracle_solve(inst)
    # re-minimize each coordinate of the inner problem with an independent solver
    for i in range(5):
        res = scipy_opt.minimize_scalar(
            lambda w, i=i: inst.c[i] * w - sol.z_star * inst.d[i] * math.log1p(w),
            bounds=(0.0, 1.0),
            method="bounded",
            options={"xatol": 1e-12},
        )
        inner = inst.c[i] * sol.w_star[i] - sol.z_star * inst.d[i] * math.log1p(sol.w_star[i])
        assert inner <= res.fun + 1e-9
    assert sol.kkt_stationarity <= 1e-8
    assert sol.complementarity <= 1e-6
    # strong duality for this convex family: primal and dual values agree
    assert sol.value == pytest.approx(sol.dual_value, abs=1e-8)


def test_oracle_analytic_instance():
    # symmetric two-agent instance whose optimum is known in closed form:
    # w* = (1/2, 1/2), z* = 3/2, optimal cost 1
    inst = BenchmarkInstance(
        c=np.array([1.0, 1.0]), d=np.array([1.0, 1.0]), b=2.0 * math.log(1.5)
    )
    sol = oracle_solve(inst)
    assert sol.z_star == pytest.approx(1.5, abs=1e-6)
    assert sol.w_star == pytest.approx(np.array([0.5, 0.5]), abs=1e-6)
    assert sol.value == pytest.approx(1.0, abs=1e-8)


def test_dual_radius_formula_frozen():
    inst = BenchmarkInstance(c=np.ones(50), d=np.full(50, 0.5), b=5.0)
    assert dual_radius_formula(inst) == pytest.approx(4.055584374890057, rel=1e-14)
    tight = BenchmarkInstance(c=np.ones(2), d=np.ones(2), b=2.0 * math.log(2.0))
    with pytest.raises(ValueError, match="Slater"):
        dual_radius_formula(tight)


def test_vectorized_saddle_matches_generic_builder():
    # two independently written routes to the same Lagrangian dynamics
    inst = random_instance(50, seed=4)
    radius = dual_radius_formula(inst)
    fast = lagrangian_saddle(inst, radius)
    generic = build_lagrangian_saddle(to_separable(inst), radius)
    seq = DigraphSequence.build([complete_digraph(50)], window_b=1)
    t_fast = run(fast, seq, 0.005, DoublingTrick(), 100)
    t_gen = run(generic, seq, 0.005, DoublingTrick(), 100)
    for col in ("saddle_gap", "disagreement_z", "phi_at_avg"):
        np.testing.assert_allclose(
            t_fast.column(col), t_gen.column(col), rtol=1e-12, atol=1e-12
        )


def test_experiment_config_validation():
    cfg = ExperimentConfig(n_agents=3, seed=1)
    again = ExperimentConfig.from_json(cfg.to_json())
    assert again == cfg
    with pytest.raises(ConfigError):
        ExperimentConfig.from_json({"n_agents": 3, "typo_key": 1})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_json({"schedule": {"type": "fibonacci"}})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_json({"n_steps": 0})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_json({"family": "portfolio"})


def test_run_benchmark_report_blocks():
    res = run_benchmark(ExperimentConfig(n_agents=3, seed=2, n_steps=60, stride=20))
    for key in ("config", "constants", "envelope", "final", "graph", "instance",
                "iss", "oracle", "protocol", "slopes"):
        assert key in res.report
    assert res.report["final"]["t"] == 60
    assert res.report["protocol"]["radius"] >= res.oracle.z_star
    assert res.iss.passed
    json.dumps(res.report)  # the whole report must be JSON serializable


def test_trace_determinism_byte_identical(tmp_path):
    cfg = ExperimentConfig(n_agents=4, seed=9, n_steps=80, stride=10)
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    run_benchmark(cfg).trace.to_csv(str(p1))
    run_benchmark(cfg).trace.to_csv(str(p2))
    assert p1.read_bytes() == p2.read_bytes()


def test_fit_loglog_slope_exact_power_laws():
    ts = np.arange(1, 2001, dtype=float)
    assert fit_loglog_slope(ts, 3.0 / np.sqrt(ts), 10, 1000) == pytest.approx(-0.5, abs=1e-12)
    assert fit_loglog_slope(ts, 7.0 / ts, 10, 1000) == pytest.approx(-1.0, abs=1e-12)
    with pytest.raises(ValueError, match="points"):
        fit_loglog_slope(ts, 1.0 / ts, 5000, 6000)


def test_plateau_level_constant_tail():
    ts = np.arange(1, 101, dtype=float)
    values = np.where(ts < 40, 10.0 / ts, 0.25)
    level, onset = plateau_level(ts, values)
    assert level == pytest.approx(0.25)
    assert onset <= 40.0


def test_cli_usage_and_config_errors(tmp_path, capsys):
    assert main([]) == 1
    assert main(["bogus"]) == 1
    assert main(["run"]) == 1  # run requires --config
    capsys.readouterr()
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["bench", "--config", str(bad)]) == 1
    assert main(["bench", "--config", str(tmp_path / "missing.json")]) == 1


def test_cli_oracle_prints_json(capsys):
    assert main(["oracle", "--seed", "3"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["z_star"] > 0.0
    assert len(payload["w_star"]) == 50


def test_cli_bench_writes_outputs(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n_agents": 3, "seed": 2, "n_steps": 60, "stride": 20}))
    out = tmp_path / "out"
    assert main(["bench", "--config", str(cfg), "--out", str(out)]) == 0
    payload = json.loads(capsys.readouterr().out)
    for name in ("trace.csv", "report.json", "config.json"):
        assert os.path.exists(out / name)
    assert payload["iss_passed"] is True
    roundtrip = RunTrace.from_csv(str(out / "trace.csv"))
    assert roundtrip.meta["seed"] == 2


def test_cli_check_pass_and_fail(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n_agents": 3, "seed": 2, "n_steps": 60, "stride": 20}))
    out = tmp_path / "out"
    assert main(["bench", "--config", str(cfg), "--out", str(out)]) == 0
    capsys.readouterr()
    trace_path = str(out / "trace.csv")
    assert main(["check", "--trace", trace_path]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["passed"] is True and report["envelope"]["passed"] is True

    trace = RunTrace.from_csv(trace_path)
    trace.columns["cum_disagreement_z"] = trace.columns["cum_disagreement_z"] * 1e9
    broken_path = str(tmp_path / "broken.csv")
    trace.to_csv(broken_path)
    assert main(["check", "--trace", broken_path]) == 2
    report = json.loads(capsys.readouterr().out)
    assert report["passed"] is False


def test_cli_dualbound_and_bound(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n_agents": 3, "seed": 2, "n_steps": 60, "stride": 20}))
    assert main(["dualbound", "--config", str(cfg)]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["radius"] > 0.0 and payload["gamma_lower"] > 0.0
    assert payload["radius"] >= 0.0 and payload["rounds_total"] >= payload["k_star_star"]

    assert main(["bound", "--config", str(cfg)]) == 0
    payload = json.loads(capsys.readouterr().out)
    envelope = payload["envelope"]
    assert envelope and envelope[0][0] == 2
    values = [row[1] for row in envelope]
    assert values == sorted(values, reverse=True)
