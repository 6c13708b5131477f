"""Bound constants, theorem envelope, ISS verification, saddle inequality check."""

from __future__ import annotations

import math

import numpy as np
import pytest

from saddlenet.analysis import (
    BoundConstants,
    DOUBLING_FACTOR,
    c_u,
    cdoubling,
    check_iss_bounds,
    check_lemma42,
    contraction_factor,
    corollary_constants,
    theorem_bound,
)
from saddlenet.benchmark import (
    BenchmarkInstance,
    ExperimentConfig,
    lagrangian_saddle,
    run_benchmark,
    to_separable,
)
from saddlenet.dynamics import DoublingTrick, run
from saddlenet.graph import DigraphSequence, complete_digraph, sigma_max_bound


def test_contraction_factor_and_cu_frozen():
    assert contraction_factor(0.01, 50) == 1.0 - 0.01 / 10_000
    assert c_u(0.01, 50, 1) == pytest.approx(3555555.555453313, rel=1e-12)
    assert c_u(0.01, 50, 1) == pytest.approx(3.5556e6, rel=1e-2)
    assert c_u(0.5, 2, 1) == pytest.approx(113.77777777777777, rel=1e-12)
    # longer windows weaken the contraction and grow the gain
    assert c_u(0.1, 4, 2) > c_u(0.1, 4, 1)


def test_doubling_factor():
    assert DOUBLING_FACTOR == pytest.approx(math.sqrt(2.0) / (math.sqrt(2.0) - 1.0), rel=1e-15)
    assert cdoubling(2.0) == pytest.approx(2.0 * DOUBLING_FACTOR)


def hand_block_constant(b1, b2, h1, h2, h_cross, sigma, lam, cu):
    return 4.0 * (b1**2 + b2**2) + 6.0 * (h1**2 + h2**2) + h_cross * (3.0 + sigma * lam) * cu * (
        b2 + 2.0 * h2
    )


def test_theorem_bound_formula():
    consts = BoundConstants(
        b_w=1.0, b_d=0.5, b_mu=0.25, b_z=2.0,
        h_w=1.5, h_d=0.25, h_mu=0.1, h_z=0.75,
        sigma=0.2, lambda_bar=1.3, delta_tilde=0.05, n_agents=4, window_b=2,
    )
    cu = c_u(0.05, 4, 2)
    c_wd = hand_block_constant(1.0, 0.5, 1.5, 0.25, 0.25, 0.2, 1.3, cu)
    c_mz = hand_block_constant(0.25, 2.0, 0.1, 0.75, 0.75, 0.2, 1.3, cu)
    assert consts.c_u_value == pytest.approx(cu, rel=1e-14)
    assert consts.c_wd == pytest.approx(c_wd, rel=1e-12)
    assert consts.c_mz == pytest.approx(c_mz, rel=1e-12)
    expected_t5 = (cdoubling(c_wd) + cdoubling(c_mz)) / (2.0 * math.sqrt(4.0))
    assert theorem_bound(5, consts) == pytest.approx(expected_t5, rel=1e-12)
    assert theorem_bound(10, consts) < theorem_bound(5, consts)
    with pytest.raises(ValueError):
        theorem_bound(1, consts)


def test_corollary_constants_closed_forms():
    inst = BenchmarkInstance(c=np.array([1.0, 1.0]), d=np.array([1.0, 1.0]), b=0.2)
    sep = to_separable(inst)
    radius = 3.0
    seq = DigraphSequence.build([complete_digraph(2)], window_b=1)
    lam = sigma_max_bound([seq.graph_at(1)])
    consts = corollary_constants(
        sep,
        radius,
        sigma=0.25,
        lambda_bar=lam,
        delta_tilde=0.1,
        window_b=1,
        h_f_w=1.0,
        h_g_w=1.0,
    )
    assert consts.b_w == pytest.approx(math.sqrt(2.0), rel=1e-12)
    assert consts.b_z == pytest.approx(math.sqrt(2.0) * radius, rel=1e-12)
    assert consts.b_d == 0.0 and consts.b_mu == 0.0 and consts.h_mu == 0.0
    assert consts.h_w == pytest.approx(math.sqrt(2.0) * (1.0 + radius), rel=1e-12)
    # per-agent sup |g_i + b_i| over [0, 1] sits at a box vertex: log2 - 0.1
    per_agent = max(0.1, abs(0.1 - math.log(2.0)))
    assert consts.h_z == pytest.approx(math.sqrt(2.0) * per_agent, rel=1e-9)


def test_check_iss_bounds_on_benchmark_run():
    res = run_benchmark(ExperimentConfig(n_agents=3, seed=2, n_steps=400, stride=20))
    assert res.iss.passed
    assert res.iss.worst_pointwise_d <= 1.0 + 1e-9
    assert res.iss.worst_cumulative_z <= 1.0 + 1e-9
    # single agent: disagreement is identically zero, trivially green
    res1 = run_benchmark(ExperimentConfig(n_agents=1, seed=0, n_steps=50, stride=10))
    assert res1.iss.passed
    assert res1.iss.worst_pointwise_z == 0.0 and res1.iss.worst_cumulative_z == 0.0


def test_check_iss_bounds_detects_violation():
    res = run_benchmark(ExperimentConfig(n_agents=3, seed=2, n_steps=400, stride=20))
    trace = res.trace
    dis = np.asarray(trace.columns["cum_disagreement_z"], dtype=float)
    trace.columns["cum_disagreement_z"] = dis * 1e9
    report = check_iss_bounds(trace)
    assert not report.passed
    assert report.worst_cumulative_z > 1.0


def test_check_lemma42_on_feasible_probe():
    inst = BenchmarkInstance(c=np.array([1.0, 1.0]), d=np.array([1.0, 1.0]), b=0.2)
    prob = lagrangian_saddle(inst, radius=3.0)
    seq = DigraphSequence.build([complete_digraph(2)], window_b=1)
    trace = run(prob, seq, 0.25, DoublingTrick(), 150, keep_history=True)
    empty = np.zeros(0)
    probe = (np.array([0.2, 0.8]), empty, empty, np.array([0.5, 0.5]))
    report = check_lemma42(trace, prob, probe)
    assert report.passed
    assert report.margin_convex >= 0.0 and report.margin_concave >= 0.0
    # an earlier cut of the same run must also satisfy both inequalities
    early = check_lemma42(trace, prob, probe, t=40)
    assert early.passed and early.t == 40


def test_check_lemma42_rejects_bad_inputs():
    inst = BenchmarkInstance(c=np.array([1.0, 1.0]), d=np.array([1.0, 1.0]), b=0.2)
    prob = lagrangian_saddle(inst, radius=3.0)
    seq = DigraphSequence.build([complete_digraph(2)], window_b=1)
    with_history = run(prob, seq, 0.25, DoublingTrick(), 60, keep_history=True)
    empty = np.zeros(0)
    outside = (np.array([2.0, 0.5]), empty, empty, np.array([0.5, 0.5]))
    with pytest.raises(ValueError, match="infeasible probe"):
        check_lemma42(with_history, prob, outside)
    bare = run(prob, seq, 0.25, DoublingTrick(), 60)
    probe = (np.array([0.2, 0.8]), empty, empty, np.array([0.5, 0.5]))
    with pytest.raises(ValueError, match="history"):
        check_lemma42(bare, prob, probe)
