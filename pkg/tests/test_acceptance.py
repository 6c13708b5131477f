"""Acceptance criteria, one test per criterion, each printing a PASS line.

Run with ``pytest tests/test_acceptance.py -v -rA`` to see the measured
values for every criterion alongside the pass/fail verdicts. The whole
module is self-contained: every check rebuilds its own instances and runs.
"""

from __future__ import annotations

import math
import time

import numpy as np
import pytest

from saddlenet.analysis import c_u, theorem_bound
from saddlenet.benchmark import (
    BenchmarkInstance,
    ExperimentConfig,
    fit_loglog_slope,
    oracle_solve,
    random_instance,
    run_benchmark,
    to_separable,
)
from saddlenet.constrained import (
    build_lagrangian_saddle,
    cspsg_step,
    run_dual_bound_protocol,
)
from saddlenet.dynamics import (
    DoublingTrick,
    SaddleProblem,
    block_disagreement,
    initial_state,
    rate,
    step,
)
from saddlenet.graph import (
    DigraphSequence,
    WeightedDigraph,
    complete_digraph,
    consensus_stepsize_interval,
)
from saddlenet.projections import FullSpace, OrthantBall


def _report(k: int, detail: str) -> None:
    print(f"CRITERION {k} PASS: {detail}")


@pytest.fixture(scope="module")
def doubling_run():
    cfg = ExperimentConfig(n_agents=50, seed=59, sigma=0.2475, n_steps=100_000, stride=100)
    t0 = time.perf_counter()
    result = run_benchmark(cfg)
    return result, time.perf_counter() - t0


@pytest.fixture(scope="module")
def constant_run():
    cfg = ExperimentConfig(
        n_agents=50,
        seed=59,
        sigma=0.2475,
        n_steps=100_000,
        stride=100,
        schedule={"type": "constant", "eta": 0.05},
    )
    return run_benchmark(cfg)


def test_criterion_1_convergence_rate(doubling_run):
    """Saddle-gap log-log slope -0.5 +/- 0.15 over t in [1e2, 1e4], under 5 minutes."""
    result, elapsed = doubling_run
    ts = result.trace.column("t")
    gap = result.trace.column("saddle_gap")
    slope = fit_loglog_slope(ts, gap, 100.0, 10_000.0)
    _report(1, f"slope {slope:+.4f} in [-0.65, -0.35], runtime {elapsed:.1f}s <= 300s")
    assert -0.65 <= slope <= -0.35
    assert elapsed <= 300.0


def test_criterion_2_constant_stepsize(doubling_run, constant_run):
    """Cost-error slope -1 +/- 0.2 before the plateau; steady error above doubling."""
    ts = constant_run.trace.column("t")
    cost = constant_run.trace.column("cost_err")
    # steady level from the final decade, then fit the bias-corrected decay
    steady = float(np.median(cost[ts >= ts[-1] / 10.0]))
    slope = fit_loglog_slope(ts, np.abs(cost - steady), 100.0, 10_000.0)
    doubling_final = float(doubling_run[0].trace.column("cost_err")[-1])
    _report(
        2,
        f"slope {slope:+.4f} in [-1.2, -0.8]; steady {steady:.4e} > 0 "
        f"and > doubling final {doubling_final:.4e}",
    )
    assert -1.2 <= slope <= -0.8
    assert steady > 0.0
    assert steady > doubling_final


def test_criterion_3_constant_verification():
    """Frozen gain constant within 1%; stepsize interval endpoint exact."""
    gain = c_u(0.01, 50, 1)
    lower, upper = consensus_stepsize_interval(0.25, 4, 0.84)
    _report(3, f"c_u(0.01,50,1)={gain:.6e} within 1% of 3.5556e6; upper endpoint {upper!r}")
    assert gain == pytest.approx(3.5556e6, rel=1e-2)
    assert upper == 0.2475
    assert 0.0 < lower < upper


def test_criterion_4_theorem_dominance():
    """Envelope above the measured gap at every recorded t >= 2 on 20 seeds; ISS green."""
    worst_ratio = 0.0
    for seed in range(20):
        cfg = ExperimentConfig(n_agents=50, seed=seed, sigma=0.2475, n_steps=2_000, stride=50)
        res = run_benchmark(cfg)
        ts = res.trace.column("t")
        gap = res.trace.column("saddle_gap")
        mask = ts >= 2
        bounds = np.array([theorem_bound(int(t), res.constants) for t in ts[mask]])
        ratio = float(np.max(gap[mask] / bounds))
        worst_ratio = max(worst_ratio, ratio)
        assert ratio <= 1.0, f"seed {seed}: envelope violated, ratio {ratio:.3e}"
        assert res.iss.passed, f"seed {seed}: ISS bounds violated"
    _report(4, f"20 seeds, worst gap/bound ratio {worst_ratio:.3e} <= 1, ISS green")


def test_criterion_5_small_scale_oracle():
    """Running averages within 5% of the oracle by T=1e5 for N in 1..3; analytic z*."""
    rels = []
    for n in (1, 2, 3):
        cfg = ExperimentConfig(n_agents=n, seed=7 + n, n_steps=100_000, stride=100)
        res = run_benchmark(cfg)
        rel = float(res.trace.column("cost_err")[-1]) / max(abs(res.oracle.value), 1e-12)
        rels.append(rel)
        assert rel <= 5e-2, f"N={n}: relative cost error {rel:.3e}"
    inst = BenchmarkInstance(
        c=np.array([1.0, 1.0]), d=np.array([1.0, 1.0]), b=2.0 * math.log(1.5)
    )
    z_err = abs(oracle_solve(inst).z_star - 1.5)
    _report(5, f"rel cost errs {[f'{r:.1e}' for r in rels]} <= 5e-2; analytic |z*-1.5|={z_err:.2e}")
    assert z_err <= 1e-6


def _ring_matchings(n: int) -> DigraphSequence:
    """Undirected n-ring split into two balanced matchings; jointly connected at B=2."""
    a_even = np.zeros((n, n))
    a_odd = np.zeros((n, n))
    for i in range(n):
        j = (i + 1) % n
        a = a_even if i % 2 == 0 else a_odd
        a[i, j] = a[j, i] = 0.5
    return DigraphSequence.build([WeightedDigraph(a_even), WeightedDigraph(a_odd)], window_b=2)


def test_criterion_6_dual_bound_soundness():
    """Protocol radius covers the oracle multiplier on 50 instances; agents agree."""
    worst_margin = np.inf
    for seed in range(50):
        n = 2 + seed % 5
        inst = random_instance(n, seed=seed)
        sol = oracle_solve(inst)
        if seed % 2 == 0 or n == 2:
            seq = DigraphSequence.build([complete_digraph(n)], window_b=1)
        else:
            seq = _ring_matchings(n)
        out = run_dual_bound_protocol(to_separable(inst), seq, 0.25)
        assert out.radius >= sol.z_star, f"seed {seed}: r={out.radius} < z*={sol.z_star}"
        assert np.all(out.k_star >= 0), f"seed {seed}: an agent never certified"
        assert np.all(out.radii == out.radii[0]), f"seed {seed}: radii differ across agents"
        assert out.agreement_rounds <= (n - 1) * seq.window_b
        worst_margin = min(worst_margin, out.radius / max(sol.z_star, 1e-12))
    _report(6, f"50 instances, min radius/z* ratio {worst_margin:.3f} >= 1, identical radii")


def test_criterion_7_projection_correctness():
    """Truncated-orthant projection vs brute force on 1e3 points; variational check."""
    scipy_opt = pytest.importorskip("scipy.optimize")

    def brute(point, dim, radius):
        cons = [
            {"type": "ineq", "fun": lambda x: x},
            {"type": "ineq", "fun": lambda x, r=radius: r**2 - (x**2).sum()},
        ]
        # crude feasible warm start: clip to the orthant, shrink into the ball
        warm = np.maximum(point, 0.0)
        norm = np.linalg.norm(warm)
        if norm > radius:
            warm = warm * (0.999 * radius / norm)
        starts = [
            warm,
            np.full(dim, 0.1),
            np.full(dim, radius / math.sqrt(dim) * 0.9),
            np.zeros(dim),
        ]
        best, best_val = None, np.inf
        for x0 in starts:
            res = scipy_opt.minimize(
                lambda x: ((x - point) ** 2).sum(),
                x0,
                jac=lambda x: 2 * (x - point),
                constraints=cons,
                method="SLSQP",
                options={"maxiter": 300, "ftol": 1e-15},
            )
            if all(np.all(c["fun"](res.x) >= -1e-8) for c in cons):
                val = ((res.x - point) ** 2).sum()
                if val < best_val:
                    best, best_val = res.x, val
        assert best is not None
        return best

    rng = np.random.default_rng(3)
    worst = 0.0
    worst_vi = -np.inf
    for k in range(1000):
        dim = 1 + k % 3
        radius = 0.5 + 2.0 * rng.random()
        s = OrthantBall(dim, radius)
        p = rng.normal(scale=2.0, size=dim)
        ours = s.project(p)
        worst = max(worst, float(np.linalg.norm(ours - brute(p, dim, radius))))
        # variational inequality against independent feasible points
        for _ in range(3):
            y = rng.random(dim) * radius
            norm = np.linalg.norm(y)
            if norm > radius:
                y *= radius / norm * rng.random()
            vi = float((p - ours) @ (y - ours))
            worst_vi = max(worst_vi, vi)
    _report(7, f"1000 points, worst brute-force gap {worst:.2e} <= 1e-6, max VI {worst_vi:.2e}")
    assert worst <= 1e-6
    assert worst_vi <= 1e-8


def test_criterion_8_dynamics_invariants():
    """Mean preservation, geometric decay under joint connectivity, step equivalence."""
    n = 4
    seq = _ring_matchings(n)
    consensus = SaddleProblem(
        n_agents=n,
        dim_w=1,
        dim_d=n,
        dim_mu=1,
        dim_z=n,
        value=lambda w, d, mu, z: 0.0,
        grad_w=lambda w, d, mu, z: np.zeros(1),
        grad_d=lambda w, d, mu, z: np.zeros(n),
        grad_mu=lambda w, d, mu, z: np.zeros(1),
        grad_z=lambda w, d, mu, z: np.zeros(n),
        w_set=FullSpace(1),
        d_set=FullSpace(n),
        mu_set=FullSpace(1),
        z_set=FullSpace(n),
    )
    rng = np.random.default_rng(8)
    state = initial_state(consensus, z=rng.normal(size=n))
    mean0 = state.z.mean()
    window = seq.window_b
    dis = [block_disagreement(state.z, n)]
    for t in range(1, 41):
        state = step(consensus, state, seq.graph_at(t), 0.25, 0.1)
        assert abs(state.z.mean() - mean0) <= 1e-12
        if t % window == 0:
            dis.append(block_disagreement(state.z, n))
    ratios = [b / a for a, b in zip(dis, dis[1:])]
    rho = max(ratios)
    assert rho < 1.0, f"some joint-connectivity window failed to contract: {rho}"
    assert dis[-1] <= dis[0] * rho ** len(ratios) + 1e-15

    worst_step_gap = 0.0
    gen = np.random.default_rng(21)
    for trial in range(100):
        m = 2 + trial % 3
        inst = random_instance(m, seed=trial)
        sep = to_separable(inst)
        radius = 2.0 + gen.random()
        prob = build_lagrangian_saddle(sep, radius)
        g = complete_digraph(m)
        st0 = initial_state(prob, w=gen.random(m), z=gen.random(m) * radius / 2)
        eta = rate(DoublingTrick(), 1 + trial % 5)
        ours = cspsg_step(sep, st0, g, 0.25, eta, radius)
        ref = step(prob, st0, g, 0.25, eta)
        gap = max(
            float(np.max(np.abs(ours.w - ref.w))), float(np.max(np.abs(ours.z - ref.z)))
        )
        worst_step_gap = max(worst_step_gap, gap)
        assert gap <= 1e-12
    _report(
        8,
        f"mean drift <= 1e-12, window contraction rho {rho:.3f} < 1, "
        f"step equivalence gap {worst_step_gap:.1e} <= 1e-12 over 100 trials",
    )
