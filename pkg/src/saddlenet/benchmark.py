"""Nonlinear resource-allocation benchmark family and the experiment harness.

The family: ``n`` agents choose allocations ``w_i in [0, 1]`` to minimize
``sum_i c_i w_i`` subject to the coupling constraint
``sum_i -d_i log(1 + w_i) + b <= 0`` (enough total utility must be bought).
Costs and utility weights are drawn uniformly from [0, 1]; the budget
defaults to ``n / 10``. Slater holds exactly when ``log(2) sum_i d_i > b``
(best case is every ``w_i = 1``), and the optimal dual is a scalar with the
closed-form bound ``n max_j c_j / (log(2) sum_i d_i - b)``.

The harness wires the pieces together: draw an instance and a communication
sequence, run the dual-set bounding protocol for the multiplier radius, solve
the instance with an independent high-accuracy dual method, run the
distributed dynamics, and emit a trace plus a report with every computable
bound evaluated.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .analysis import (
    BoundConstants,
    IssReport,
    c_u,
    check_iss_bounds,
    corollary_constants,
    theorem_bound,
)
from .constrained import DualBoundRun, SeparableProblem, run_dual_bound_protocol
from .dynamics import (
    RunTrace,
    SaddleProblem,
    Schedule,
    run,
    schedule_from_json,
    schedule_to_json,
)
from .fileio import atomic_write_text
from .graph import (
    DigraphSequence,
    complete_digraph,
    consensus_stepsize_interval,
    max_degree_count,
    watts_strogatz,
)
from .projections import Box, FullSpace, OrthantBall, Replicated
from .univariate import golden_section_maximize

__all__ = [
    "BenchmarkInstance",
    "random_instance",
    "to_separable",
    "lagrangian_saddle",
    "OracleSolution",
    "oracle_solve",
    "dual_radius_formula",
    "benchmark_graphs",
    "ConfigError",
    "ExperimentConfig",
    "BenchmarkResult",
    "run_benchmark",
    "write_outputs",
    "fit_loglog_slope",
    "plateau_level",
]


@dataclass(frozen=True)
class BenchmarkInstance:
    """One resource-allocation instance: costs ``c``, weights ``d``, budget ``b``."""

    c: np.ndarray
    d: np.ndarray
    b: float

    def __post_init__(self) -> None:
        c = np.asarray(self.c, dtype=float)
        d = np.asarray(self.d, dtype=float)
        if c.ndim != 1 or c.shape != d.shape or c.shape[0] < 1:
            raise ValueError("c and d must be 1-D arrays of equal positive length")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(d)) and math.isfinite(self.b)):
            raise ValueError("instance data must be finite")
        if np.any(c < 0.0) or np.any(d < 0.0):
            raise ValueError("costs and utility weights must be nonnegative")
        c.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "d", d)

    @property
    def n_agents(self) -> int:
        return self.c.shape[0]

    @property
    def slater_margin(self) -> float:
        """``log(2) sum_i d_i - b``; positive iff ``w = 1`` strictly satisfies the constraint."""
        return math.log(2.0) * float(self.d.sum()) - self.b


def random_instance(
    n_agents: int, seed: int, b: float | None = None, max_attempts: int = 10_000
) -> BenchmarkInstance:
    """Draw ``c, d ~ U[0, 1]^n`` (redrawn until Slater holds) with budget ``b``."""
    if n_agents < 1:
        raise ValueError("need at least one agent")
    budget = n_agents / 10.0 if b is None else float(b)
    rng = np.random.default_rng(seed)
    for _ in range(max_attempts):
        c = rng.random(n_agents)
        d = rng.random(n_agents)
        inst = BenchmarkInstance(c, d, budget)
        if inst.slater_margin > 0.0:
            return inst
    raise RuntimeError("could not draw a Slater-feasible instance")


def to_separable(inst: BenchmarkInstance) -> SeparableProblem:
    """Per-agent closures: ``f_i = c_i w``, ``g_i = -d_i log(1 + w)``, offset ``b/n``."""
    n = inst.n_agents

    def make(i: int):
        c_i, d_i = float(inst.c[i]), float(inst.d[i])
        f = lambda w, d, c_i=c_i: c_i * float(w[0])
        g = lambda w, d, d_i=d_i: np.array([-d_i * math.log1p(float(w[0]))])
        gf = lambda w, d, c_i=c_i: np.array([c_i])
        jg = lambda w, d, d_i=d_i: np.array([[-d_i / (1.0 + float(w[0]))]])
        return f, g, gf, jg

    made = [make(i) for i in range(n)]
    return SeparableProblem(
        f=tuple(m[0] for m in made),
        g=tuple(m[1] for m in made),
        grad_f_w=tuple(m[2] for m in made),
        jac_g_w=tuple(m[3] for m in made),
        w_sets=tuple(Box.cube(1, 0.0, 1.0) for _ in range(n)),
        b_split=np.full((n, 1), inst.b / n),
        m=1,
    )


def lagrangian_saddle(inst: BenchmarkInstance, radius: float) -> SaddleProblem:
    """Vectorized Lagrangian saddle problem for the benchmark family.

    Closed-form stacked oracles (no per-agent Python loop); tests pin this
    against :func:`saddlenet.constrained.build_lagrangian_saddle` applied to
    :func:`to_separable`, which it must match step for step.
    """
    if not (radius > 0.0 and math.isfinite(radius)):
        raise ValueError("multiplier radius must be positive and finite")
    n = inst.n_agents
    c, d = inst.c, inst.d
    offset = inst.b / n
    zeros0 = np.zeros(0)

    def constraint(w: np.ndarray) -> np.ndarray:
        return -d * np.log1p(w) + offset

    def value(w, dd, mu, z) -> float:
        return float(c @ w + z @ constraint(w))

    def grad_w(w, dd, mu, z) -> np.ndarray:
        return c - z * d / (1.0 + w)

    def grad_z(w, dd, mu, z) -> np.ndarray:
        return constraint(w)

    def grad_empty(w, dd, mu, z) -> np.ndarray:
        return zeros0

    return SaddleProblem(
        n_agents=n,
        dim_w=n,
        dim_d=0,
        dim_mu=0,
        dim_z=n,
        value=value,
        grad_w=grad_w,
        grad_d=grad_empty,
        grad_mu=grad_empty,
        grad_z=grad_z,
        w_set=Box.cube(n, 0.0, 1.0),
        d_set=FullSpace(0),
        mu_set=FullSpace(0),
        z_set=Replicated(OrthantBall(1, radius), n),
    )


def dual_radius_formula(inst: BenchmarkInstance) -> float:
    """Closed-form dual-norm bound ``n max_j c_j / (log(2) sum_i d_i - b)``."""
    margin = inst.slater_margin
    if margin <= 0.0:
        raise ValueError("Slater condition not certified")
    return inst.n_agents * float(inst.c.max()) / margin


@dataclass(frozen=True)
class OracleSolution:
    """High-accuracy centralized solution used as ground truth in reports.

    ``value`` is the optimal cost, ``z_star`` a maximizer of the dual
    function, ``w_star`` the corresponding primal point; the residuals are
    the projected-gradient stationarity norm, the constraint value (feasible
    when <= 0), and the complementary-slackness product.
    """

    w_star: np.ndarray
    z_star: float
    value: float
    dual_value: float
    kkt_stationarity: float
    constraint_value: float
    complementarity: float


def _inner_minimizer(inst: BenchmarkInstance, z: float) -> np.ndarray:
    """``argmin_{w in [0,1]^n} c @ w - z * d @ log(1+w)``, coordinatewise closed form."""
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(
            inst.c > 0.0,
            z * inst.d / np.where(inst.c > 0.0, inst.c, 1.0) - 1.0,
            np.where(z * inst.d > 0.0, math.inf, 0.0),
        )
    return np.clip(w, 0.0, 1.0)


def oracle_solve(inst: BenchmarkInstance, iterations: int = 200) -> OracleSolution:
    """Solve the instance by exact maximization of the scalar dual function.

    ``q(z) = min_w (c @ w - z * d @ log(1+w)) + z * b`` is concave with the
    inner minimizer available in closed form; golden-section search over
    ``[0, 2 * formula_bound]`` locates its maximum, which equals the optimal
    cost by strong duality (Slater). Independent of the distributed protocol
    by construction: the bracket comes from the closed-form bound, never from
    protocol output.
    """
    margin = inst.slater_margin
    if margin <= 0.0:
        raise ValueError("Slater condition not certified")

    def q(z: float) -> float:
        w = _inner_minimizer(inst, z)
        return float(inst.c @ w - z * (inst.d @ np.log1p(w)) + z * inst.b)

    hi = 2.0 * dual_radius_formula(inst)
    z_star, q_star = golden_section_maximize(q, 0.0, max(hi, 1e-12), iterations)
    w_star = _inner_minimizer(inst, z_star)
    constraint = float(-inst.d @ np.log1p(w_star) + inst.b)
    grad = inst.c - z_star * inst.d / (1.0 + w_star)
    stationarity = float(np.linalg.norm(w_star - np.clip(w_star - grad, 0.0, 1.0)))
    return OracleSolution(
        w_star=w_star,
        z_star=float(z_star),
        value=float(inst.c @ w_star),
        dual_value=q_star,
        kkt_stationarity=stationarity,
        constraint_value=constraint,
        complementarity=abs(float(z_star) * constraint),
    )


def benchmark_graphs(
    n_agents: int, k: int = 4, p: float = 0.05, seed: int = 0
) -> DigraphSequence:
    """Static communication graph for the benchmark, as a period-1 sequence.

    Small-world for ``n_agents > k``; complete digraph with uniform weights
    for tiny networks where the small-world construction is undefined.
    """
    if n_agents > k:
        graph = watts_strogatz(n_agents, k, p, seed)
    else:
        graph = complete_digraph(n_agents)
    return DigraphSequence.build([graph], window_b=1)


class ConfigError(ValueError):
    """Invalid experiment configuration."""


_CONFIG_FIELDS = {
    "family",
    "n_agents",
    "seed",
    "b",
    "n_steps",
    "stride",
    "sigma",
    "delta_tilde_prime",
    "schedule",
    "graph_k",
    "graph_p",
    "graph_seed",
    "safety_factor",
    "keep_history",
    "out_dir",
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one benchmark run.

    ``sigma=None`` selects the upper endpoint of the consensus stepsize
    window computed from the realized smallest weight and largest neighbor
    count; ``b=None`` selects the default budget ``n_agents / 10``;
    ``graph_seed=None`` reuses ``seed``.
    """

    family: str = "resource_allocation"
    n_agents: int = 50
    seed: int = 0
    b: float | None = None
    n_steps: int = 100_000
    stride: int = 100
    sigma: float | None = None
    delta_tilde_prime: float = 0.84
    schedule: dict = field(default_factory=lambda: {"type": "doubling"})
    graph_k: int = 4
    graph_p: float = 0.05
    graph_seed: int | None = None
    safety_factor: float = 0.99
    keep_history: bool = False
    out_dir: str | None = None

    def __post_init__(self) -> None:
        if self.family != "resource_allocation":
            raise ConfigError(f"unknown problem family {self.family!r}")
        if not isinstance(self.n_agents, int) or self.n_agents < 1:
            raise ConfigError("n_agents must be a positive integer")
        if not isinstance(self.seed, int):
            raise ConfigError("seed must be an integer")
        if not isinstance(self.n_steps, int) or self.n_steps < 1:
            raise ConfigError("n_steps must be a positive integer")
        if not isinstance(self.stride, int) or self.stride < 1:
            raise ConfigError("stride must be a positive integer")
        if self.sigma is not None and not self.sigma > 0.0:
            raise ConfigError("sigma must be positive when given")
        if not 0.0 < self.delta_tilde_prime < 1.0:
            raise ConfigError("delta_tilde_prime must lie strictly between 0 and 1")
        try:
            schedule_from_json(self.schedule)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad schedule: {exc}") from exc

    @staticmethod
    def from_json(obj: dict) -> "ExperimentConfig":
        if not isinstance(obj, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(obj) - _CONFIG_FIELDS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return ExperimentConfig(**obj)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def to_json(self) -> dict:
        return asdict(self)

    def make_schedule(self) -> Schedule:
        return schedule_from_json(self.schedule)


@dataclass
class BenchmarkResult:
    """Run artifacts: instance, graphs, protocol, oracle, constants, trace, report."""

    config: ExperimentConfig
    instance: BenchmarkInstance
    sequence: DigraphSequence
    protocol: DualBoundRun
    oracle: OracleSolution
    constants: BoundConstants | None
    iss: IssReport
    trace: RunTrace
    report: dict


def _default_sigma(seq: DigraphSequence, delta_tilde_prime: float) -> float:
    """Upper endpoint of the stepsize window in neighbor-count accounting.

    Mirrors the reference design choice: ``delta`` is the smallest positive
    weight and ``d_max`` the largest neighbor count (so uniformly weighted
    graphs with max degree 4 and ``delta_tilde_prime = 0.84`` give 0.2475).
    Falls back to 0.5 for a single agent, where consensus is inert.
    """
    if seq.n == 1:
        return 0.5
    counts = max_degree_count(seq.graphs)
    return consensus_stepsize_interval(seq.delta, float(counts), delta_tilde_prime)[1]


def _weighted_delta_tilde(seq: DigraphSequence, delta_tilde_prime: float) -> float | None:
    """Contraction constant from the weighted delta and weighted max out-degree."""
    if seq.n == 1:
        return None
    return min(delta_tilde_prime, (1.0 - delta_tilde_prime) * seq.delta / seq.d_max)


def run_benchmark(config: ExperimentConfig) -> BenchmarkResult:
    """Full pipeline: instance, graphs, radius protocol, oracle, dynamics, report."""
    inst = random_instance(config.n_agents, config.seed, config.b)
    graph_seed = config.seed if config.graph_seed is None else config.graph_seed
    seq = benchmark_graphs(config.n_agents, config.graph_k, config.graph_p, graph_seed)
    sigma = _default_sigma(seq, config.delta_tilde_prime) if config.sigma is None else config.sigma

    sep = to_separable(inst)
    protocol = run_dual_bound_protocol(sep, seq, sigma, safety_factor=config.safety_factor)
    oracle = oracle_solve(inst)
    problem = lagrangian_saddle(inst, protocol.radius)
    delta_tilde = _weighted_delta_tilde(seq, config.delta_tilde_prime)
    constants = None
    if delta_tilde is not None:
        constants = corollary_constants(
            sep,
            protocol.radius,
            sigma=sigma,
            lambda_bar=seq.lambda_bar,
            delta_tilde=delta_tilde,
            window_b=seq.window_b,
            h_f_w=float(inst.c.max()),
            h_g_w=float(inst.d.max()),
        )

    target = oracle.value

    def extra_metrics(t, av_w, av_d, av_mu, av_z):
        cost_err = abs(float(inst.c @ av_w) - target)
        violation = float(-inst.d @ np.log1p(av_w) + inst.b)
        return cost_err, violation

    meta = {
        "family": config.family,
        "seed": config.seed,
        "instance": {"c": inst.c.tolist(), "d": inst.d.tolist(), "b": inst.b},
        "radius": protocol.radius,
        "gamma_lower": protocol.gamma_lower,
        "delta_tilde": delta_tilde,
        "cbar_wd": constants.cbar_wd if constants else None,
        "cbar_mz": constants.cbar_mz if constants else None,
    }
    trace = run(
        problem,
        seq,
        sigma,
        config.make_schedule(),
        config.n_steps,
        stride=config.stride,
        phi_star=target,
        extra_metrics=extra_metrics,
        keep_history=config.keep_history,
        meta=meta,
    )
    iss = check_iss_bounds(trace) if delta_tilde is not None else check_iss_bounds(trace, 0.5)
    report = _build_report(config, inst, seq, sigma, protocol, oracle, constants, iss, trace)
    return BenchmarkResult(
        config=config,
        instance=inst,
        sequence=seq,
        protocol=protocol,
        oracle=oracle,
        constants=constants,
        iss=iss,
        trace=trace,
        report=report,
    )


def _build_report(
    config: ExperimentConfig,
    inst: BenchmarkInstance,
    seq: DigraphSequence,
    sigma: float,
    protocol: DualBoundRun,
    oracle: OracleSolution,
    constants: BoundConstants | None,
    iss: IssReport,
    trace: RunTrace,
) -> dict:
    gamma_exact = inst.slater_margin
    ts = trace.column("t")
    last = -1
    report: dict = {
        "config": config.to_json(),
        "instance": {
            "n_agents": inst.n_agents,
            "b": inst.b,
            "sum_d": float(inst.d.sum()),
            "max_c": float(inst.c.max()),
            "slater_margin": gamma_exact,
        },
        "graph": {
            "n": seq.n,
            "window_b": seq.window_b,
            "delta": seq.delta,
            "d_max_weighted": seq.d_max,
            "max_neighbor_count": max_degree_count(seq.graphs) if seq.n > 1 else 0,
            "lambda_bar": seq.lambda_bar,
            "sigma": sigma,
        },
        "oracle": {
            "value": oracle.value,
            "z_star": oracle.z_star,
            "kkt_stationarity": oracle.kkt_stationarity,
            "constraint_value": oracle.constraint_value,
            "complementarity": oracle.complementarity,
        },
        "protocol": {
            "radius": protocol.radius,
            "gamma_lower": protocol.gamma_lower,
            "gamma_exact": gamma_exact,
            "gamma_sound": bool(protocol.gamma_lower <= gamma_exact),
            "radius_formula": dual_radius_formula(inst),
            "radius_covers_z_star": bool(protocol.radius >= oracle.z_star),
            "k_star_star": protocol.k_star_star,
            "agreement_rounds": protocol.agreement_rounds,
            "rounds_total": protocol.rounds_total,
        },
        "final": {
            "t": int(ts[last]),
            "saddle_gap": float(trace.column("saddle_gap")[last]),
            "cost_err": float(trace.column("cost_err")[last]),
            "constraint_violation": float(trace.column("constraint_violation")[last]),
            "disagreement_z": float(trace.column("disagreement_z")[last]),
        },
        "iss": asdict(iss),
    }
    if constants is not None:
        report["constants"] = {
            "b_w": constants.b_w,
            "b_z": constants.b_z,
            "h_w": constants.h_w,
            "h_z": constants.h_z,
            "c_u": constants.c_u_value,
            "c_wd": constants.c_wd,
            "c_mz": constants.c_mz,
            "cbar_wd": constants.cbar_wd,
            "cbar_mz": constants.cbar_mz,
        }
        horizon = int(ts[last])
        report["envelope"] = [
            [t, theorem_bound(t, constants)]
            for t in (10, 100, 1_000, 10_000, 100_000)
            if 2 <= t <= horizon
        ]
    try:
        report["slopes"] = {
            "saddle_gap": fit_loglog_slope(ts, trace.column("saddle_gap"), 100.0, 10_000.0),
            "cost_err": fit_loglog_slope(ts, trace.column("cost_err"), 100.0, 10_000.0),
        }
    except ValueError:
        report["slopes"] = None
    if (
        inst.n_agents == 50
        and seq.n > 1
        and max_degree_count(seq.graphs) == 4
        and abs(inst.b - 5.0) < 1e-12
    ):
        report["reference_constants"] = {
            "c_u_at_0.01_50_1": c_u(0.01, 50, 1),
            "stepsize_interval_0.25_4_0.84": list(consensus_stepsize_interval(0.25, 4.0, 0.84)),
        }
    return report


def write_outputs(result: BenchmarkResult, out_dir: str) -> dict[str, str]:
    """Write ``trace.csv``, ``report.json``, ``config.json`` atomically; return paths."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "trace": os.path.join(out_dir, "trace.csv"),
        "report": os.path.join(out_dir, "report.json"),
        "config": os.path.join(out_dir, "config.json"),
    }
    result.trace.to_csv(paths["trace"])
    atomic_write_text(paths["report"], json.dumps(result.report, indent=2, sort_keys=True) + "\n")
    atomic_write_text(paths["config"], json.dumps(result.config.to_json(), indent=2, sort_keys=True) + "\n")
    return paths


def fit_loglog_slope(ts: np.ndarray, values: np.ndarray, t_min: float, t_max: float) -> float:
    """Least-squares slope of ``log(values)`` against ``log(t)`` on a window.

    Only rows with ``t_min <= t <= t_max`` and positive finite values enter;
    needs at least five of them.
    """
    ts = np.asarray(ts, dtype=float)
    values = np.asarray(values, dtype=float)
    mask = (ts >= t_min) & (ts <= t_max) & (values > 0.0) & np.isfinite(values)
    if mask.sum() < 5:
        raise ValueError("not enough points for slope fit")
    slope, _ = np.polyfit(np.log(ts[mask]), np.log(values[mask]), 1)
    return float(slope)


def plateau_level(ts: np.ndarray, values: np.ndarray, tail_fraction: float = 10.0) -> tuple[float, float]:
    """Steady-state level and onset time of a decaying-then-flat series.

    The level is the median over the last decade ``t >= T / tail_fraction``;
    the onset is the first recorded time at which the series dips below
    1.25x the level. Used to pick honest fit windows for constant-rate runs.
    """
    ts = np.asarray(ts, dtype=float)
    values = np.asarray(values, dtype=float)
    horizon = ts[-1]
    tail = values[ts >= horizon / tail_fraction]
    level = float(np.median(tail))
    below = np.nonzero(values <= 1.25 * level)[0]
    onset = float(ts[below[0]]) if below.size else horizon
    return level, onset
