"""Projected saddle-point subgradient dynamics with Laplacian averaging.

The state carries four blocks: a primal block ``w``, per-agent copies ``d`` of
a global decision variable (consensus-averaged), a multiplier block ``mu``,
and per-agent multiplier copies ``z`` (consensus-averaged). One step from
``(w_t, d_t, mu_t, z_t)`` with stepsize ``eta_t`` and consensus stepsize
``sigma`` on the graph active at time ``t`` is

    w_{t+1}  = P_W ( w_t  - eta_t * gw_t )
    d_{t+1}  = P_D ( d_t  - sigma * (L_t (x) I) d_t - eta_t * gd_t )
    mu_{t+1} = P_M ( mu_t + eta_t * gmu_t )
    z_{t+1}  = P_Z ( z_t  - sigma * (L_t (x) I) z_t + eta_t * gz_t )

with every subgradient evaluated at the pre-step state: ``gw, gd`` are
subgradients of the saddle function in its convex arguments and ``gmu, gz``
supergradients in its concave arguments. Running averages over iterates
``1..t`` are maintained incrementally and are the quantities the convergence
bounds speak about.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .fileio import atomic_write_text
from .graph import DigraphSequence, WeightedDigraph, laplacian
from .projections import ConvexSet

__all__ = [
    "DoublingTrick",
    "ConstantRate",
    "InvSqrtRate",
    "HarmonicRate",
    "rate",
    "schedule_to_json",
    "schedule_from_json",
    "SaddleProblem",
    "NetworkState",
    "initial_state",
    "update_running_average",
    "block_disagreement",
    "step",
    "run",
    "RunHistory",
    "RunTrace",
    "CSV_COLUMNS",
]


# ---------------------------------------------------------------------------
# learning-rate schedules


@dataclass(frozen=True)
class DoublingTrick:
    """Piecewise-constant rate ``1/sqrt(2^m)`` on epochs ``t in [2^m, 2^(m+1))``.

    Nonincreasing and not square-summable: the squared rates sum to exactly 1
    per epoch, so partial sums grow without bound while single terms vanish.
    """

    def rate(self, t: int) -> float:
        return 2.0 ** (-0.5 * (t.bit_length() - 1))


@dataclass(frozen=True)
class ConstantRate:
    eta: float

    def __post_init__(self) -> None:
        if not (self.eta > 0.0 and math.isfinite(self.eta)):
            raise ValueError("eta must be positive and finite")

    def rate(self, t: int) -> float:
        return self.eta


@dataclass(frozen=True)
class InvSqrtRate:
    """Rate ``c / sqrt(t)``."""

    c: float = 1.0

    def __post_init__(self) -> None:
        if not (self.c > 0.0 and math.isfinite(self.c)):
            raise ValueError("c must be positive and finite")

    def rate(self, t: int) -> float:
        return self.c / math.sqrt(t)


@dataclass(frozen=True)
class HarmonicRate:
    """Rate ``c / t``."""

    c: float = 1.0

    def __post_init__(self) -> None:
        if not (self.c > 0.0 and math.isfinite(self.c)):
            raise ValueError("c must be positive and finite")

    def rate(self, t: int) -> float:
        return self.c / t


Schedule = DoublingTrick | ConstantRate | InvSqrtRate | HarmonicRate


def rate(schedule: Schedule, t: int) -> float:
    """Learning rate at step ``t >= 1`` under the given schedule."""
    if not isinstance(t, (int, np.integer)) or t < 1:
        raise ValueError("time indices start at 1")
    return schedule.rate(int(t))


def schedule_to_json(schedule: Schedule) -> dict:
    if isinstance(schedule, DoublingTrick):
        return {"type": "doubling"}
    if isinstance(schedule, ConstantRate):
        return {"type": "constant", "eta": schedule.eta}
    if isinstance(schedule, InvSqrtRate):
        return {"type": "inv_sqrt", "c": schedule.c}
    if isinstance(schedule, HarmonicRate):
        return {"type": "harmonic", "c": schedule.c}
    raise ValueError(f"unknown schedule {type(schedule).__name__}")


def schedule_from_json(obj: dict | str) -> Schedule:
    if isinstance(obj, str):
        obj = {"type": obj}
    kind = obj["type"]
    if kind == "doubling":
        return DoublingTrick()
    if kind == "constant":
        return ConstantRate(float(obj["eta"]))
    if kind == "inv_sqrt":
        return InvSqrtRate(float(obj.get("c", 1.0)))
    if kind == "harmonic":
        return HarmonicRate(float(obj.get("c", 1.0)))
    raise ValueError(f"unknown schedule type {kind!r}")


# ---------------------------------------------------------------------------
# problem and state


@dataclass(frozen=True)
class SaddleProblem:
    """Convex-concave saddle function on ``W x D^N x M x Z^N`` with oracles.

    ``value(w, d, mu, z)`` evaluates the saddle function; the four oracle
    callables return a subgradient in the convex block (``grad_w``, ``grad_d``)
    or a supergradient in the concave block (``grad_mu``, ``grad_z``) at the
    given point, each as a flat array matching the block dimension. ``d`` and
    ``z`` are stacked per-agent copies (agent ``i`` owns the contiguous slice
    of length ``dim_d // n_agents`` and ``dim_z // n_agents``).
    """

    n_agents: int
    dim_w: int
    dim_d: int
    dim_mu: int
    dim_z: int
    value: Callable[[np.ndarray, np.ndarray, np.ndarray, np.ndarray], float]
    grad_w: Callable[..., np.ndarray]
    grad_d: Callable[..., np.ndarray]
    grad_mu: Callable[..., np.ndarray]
    grad_z: Callable[..., np.ndarray]
    w_set: ConvexSet
    d_set: ConvexSet
    mu_set: ConvexSet
    z_set: ConvexSet

    def __post_init__(self) -> None:
        if self.n_agents < 1:
            raise ValueError("need at least one agent")
        for name in ("dim_w", "dim_d", "dim_mu", "dim_z"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        for dim_name, set_name in (
            ("dim_w", "w_set"),
            ("dim_d", "d_set"),
            ("dim_mu", "mu_set"),
            ("dim_z", "z_set"),
        ):
            if getattr(self, set_name).dim != getattr(self, dim_name):
                raise ValueError(f"{set_name} dimension does not match {dim_name}")
        if self.dim_d % self.n_agents or self.dim_z % self.n_agents:
            raise ValueError("consensus block dimensions must be divisible by n_agents")


@dataclass(frozen=True)
class NetworkState:
    """Iterate ``t`` of the dynamics together with running averages over 1..t."""

    t: int
    w: np.ndarray
    d: np.ndarray
    mu: np.ndarray
    z: np.ndarray
    av_w: np.ndarray
    av_d: np.ndarray
    av_mu: np.ndarray
    av_z: np.ndarray


def initial_state(
    problem: SaddleProblem,
    w: np.ndarray | None = None,
    d: np.ndarray | None = None,
    mu: np.ndarray | None = None,
    z: np.ndarray | None = None,
) -> NetworkState:
    """State at ``t = 1``; omitted blocks start at the projection of zero."""

    def prep(x, set_: ConvexSet, dim: int) -> np.ndarray:
        if x is None:
            x = np.zeros(dim)
        x = np.asarray(x, dtype=float)
        if x.shape != (dim,):
            raise ValueError(f"dimension mismatch: expected block of length {dim}")
        return set_.project(x)

    w0 = prep(w, problem.w_set, problem.dim_w)
    d0 = prep(d, problem.d_set, problem.dim_d)
    mu0 = prep(mu, problem.mu_set, problem.dim_mu)
    z0 = prep(z, problem.z_set, problem.dim_z)
    return NetworkState(1, w0, d0, mu0, z0, w0.copy(), d0.copy(), mu0.copy(), z0.copy())


def update_running_average(avg: np.ndarray, x: np.ndarray, t: int) -> np.ndarray:
    """Mean of ``t`` items from the mean of the first ``t - 1`` and item ``t``."""
    if t < 1:
        raise ValueError("t must be a positive count")
    if t == 1:
        return np.array(x, dtype=float)
    return ((t - 1) / t) * avg + x / t


def block_disagreement(x: np.ndarray, n_agents: int) -> float:
    """Norm of the deviation of stacked per-agent copies from their mean.

    ``||x - (1/N) (1 1^T (x) I) x||`` for ``x`` holding ``n_agents`` stacked
    copies; zero iff all copies agree.
    """
    if n_agents < 1:
        raise ValueError("need at least one agent")
    if x.size == 0:
        return 0.0
    if x.size % n_agents:
        raise ValueError("dimension mismatch: block not divisible by n_agents")
    mat = x.reshape(n_agents, -1)
    return float(np.linalg.norm(mat - mat.mean(axis=0)))


def _consensus_term(lap: np.ndarray, x: np.ndarray, n_agents: int) -> np.ndarray:
    """``(L (x) I) x`` for stacked per-agent copies ``x``."""
    if x.size == 0:
        return x
    return (lap @ x.reshape(n_agents, -1)).ravel()


def _check_finite(g: np.ndarray, t: int) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    if not np.all(np.isfinite(g)):
        raise ValueError(f"oracle returned non-finite value (step t={t})")
    return g


def step(
    problem: SaddleProblem,
    state: NetworkState,
    graph: WeightedDigraph | np.ndarray,
    sigma: float,
    eta: float,
) -> NetworkState:
    """One dynamics step from iterate ``t`` to ``t + 1``.

    ``graph`` may be a digraph or its precomputed Laplacian. All four oracles
    are evaluated at the pre-step state before any block moves.
    """
    lap = laplacian(graph) if isinstance(graph, WeightedDigraph) else np.asarray(graph, dtype=float)
    t = state.t
    gw = _check_finite(problem.grad_w(state.w, state.d, state.mu, state.z), t)
    gd = _check_finite(problem.grad_d(state.w, state.d, state.mu, state.z), t)
    gmu = _check_finite(problem.grad_mu(state.w, state.d, state.mu, state.z), t)
    gz = _check_finite(problem.grad_z(state.w, state.d, state.mu, state.z), t)

    n = problem.n_agents
    w_new = problem.w_set.project(state.w - eta * gw)
    d_new = problem.d_set.project(state.d - sigma * _consensus_term(lap, state.d, n) - eta * gd)
    mu_new = problem.mu_set.project(state.mu + eta * gmu)
    z_new = problem.z_set.project(state.z - sigma * _consensus_term(lap, state.z, n) + eta * gz)

    t_new = t + 1
    return NetworkState(
        t=t_new,
        w=w_new,
        d=d_new,
        mu=mu_new,
        z=z_new,
        av_w=update_running_average(state.av_w, w_new, t_new),
        av_d=update_running_average(state.av_d, d_new, t_new),
        av_mu=update_running_average(state.av_mu, mu_new, t_new),
        av_z=update_running_average(state.av_z, z_new, t_new),
    )


# ---------------------------------------------------------------------------
# traces


CSV_COLUMNS = (
    "t",
    "eta",
    "phi_at_avg",
    "saddle_gap",
    "disagreement_D",
    "disagreement_z",
    "cost_err",
    "constraint_violation",
)

# Accumulator columns that let the consistency checks run from a trace file
# alone: cumulative disagreements over s <= t, and running max / cumulative
# sum of the disturbance magnitudes eta_s * ||g_s|| over s <= t - 1.
ISS_COLUMNS = (
    "cum_disagreement_D",
    "cum_disagreement_z",
    "max_input_D",
    "max_input_z",
    "cum_input_D",
    "cum_input_z",
)


@dataclass
class RunHistory:
    """Per-step arrays kept only on request (memory scales with T)."""

    w: np.ndarray
    d: np.ndarray
    mu: np.ndarray
    z: np.ndarray
    eta: np.ndarray
    grad_norm_w: np.ndarray
    grad_norm_d: np.ndarray
    grad_norm_mu: np.ndarray
    grad_norm_z: np.ndarray
    disagreement_d: np.ndarray
    disagreement_z: np.ndarray
    phi: np.ndarray


@dataclass
class RunTrace:
    """Strided record of a run: metadata echo plus named column arrays."""

    meta: dict
    columns: dict[str, np.ndarray]
    history: RunHistory | None = None

    def column(self, name: str) -> np.ndarray:
        return self.columns[name]

    @property
    def t(self) -> np.ndarray:
        return self.columns["t"]

    def to_csv(self, path: str) -> None:
        """Write the trace; one JSON metadata comment line, then CSV."""
        names = list(self.columns.keys())
        lines = ["# " + json.dumps(self.meta, sort_keys=True)]
        lines.append(",".join(names))
        cols = [self.columns[n] for n in names]
        for i in range(len(cols[0])):
            lines.append(",".join(format(float(c[i]), ".17g") for c in cols))
        atomic_write_text(path, "\n".join(lines) + "\n")

    @staticmethod
    def from_csv(path: str) -> "RunTrace":
        with open(path, "r", encoding="utf-8") as fh:
            first = fh.readline()
            if not first.startswith("# "):
                raise ValueError("trace file missing metadata header line")
            meta = json.loads(first[2:])
            names = fh.readline().strip().split(",")
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
        if data.size == 0:
            raise ValueError("trace file has no rows")
        columns = {name: data[:, k].copy() for k, name in enumerate(names)}
        return RunTrace(meta=meta, columns=columns)


def _record_marks(n_steps: int, stride: int) -> np.ndarray:
    """Times to record: a dense head, every stride-th step, a log grid, the end."""
    marks = set(range(1, min(100, n_steps) + 1))
    marks.update(range(stride, n_steps + 1, stride))
    v = 100.0
    while v < n_steps:
        v *= 1.05
        if v <= n_steps:
            marks.add(int(round(v)))
    marks.add(1)
    marks.add(n_steps)
    return np.array(sorted(marks), dtype=int)


def run(
    problem: SaddleProblem,
    sequence: DigraphSequence,
    sigma: float,
    schedule: Schedule,
    n_steps: int,
    initial: NetworkState | None = None,
    *,
    stride: int = 1,
    phi_star: float | None = None,
    extra_metrics: Callable[[int, np.ndarray, np.ndarray, np.ndarray, np.ndarray], tuple[float, float]] | None = None,
    keep_history: bool = False,
    strict_window: bool = True,
    meta: dict | None = None,
) -> RunTrace:
    """Run ``n_steps`` iterates of the dynamics and return the recorded trace.

    Trace row at time ``t`` refers to the state with ``t`` iterates completed:
    column ``phi_at_avg`` is the saddle value at the running averages over
    iterates ``1..t``, ``saddle_gap`` is ``|phi_at_avg - phi_star|`` when a
    reference value is supplied, the disagreement columns are taken at the
    current iterate, and ``eta`` is the schedule rate at ``t``. ``cost_err``
    and ``constraint_violation`` come from the optional ``extra_metrics``
    callback (NaN otherwise).

    The consensus stepsize must satisfy ``sigma * d_max <= 1`` (the weighted
    row-stochasticity condition); ``strict_window=False`` downgrades the
    error to a warning.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    if stride < 1:
        raise ValueError("stride must be at least 1")
    if sequence.n != problem.n_agents:
        raise ValueError("graph sequence node count does not match problem agents")
    if not (sigma > 0.0 and math.isfinite(sigma)):
        raise ValueError("sigma must be positive and finite")
    if sequence.d_max > 0.0 and sigma * sequence.d_max > 1.0 + 1e-12:
        msg = (
            f"sigma={sigma} exceeds the feasible window: "
            f"sigma * d_max = {sigma * sequence.d_max} > 1"
        )
        if strict_window:
            raise ValueError(msg)
        warnings.warn(msg, stacklevel=2)

    state = initial_state(problem) if initial is None else initial
    if state.t != 1:
        raise ValueError("initial state must be at t=1")

    n = problem.n_agents
    w, d, mu, z = state.w, state.d, state.mu, state.z
    av_w, av_d, av_mu, av_z = state.av_w, state.av_d, state.av_mu, state.av_z

    marks = _record_marks(n_steps, stride)
    mark_set = set(int(m) for m in marks)
    rows: list[list[float]] = []
    nan = float("nan")

    cum_dis_d = 0.0
    cum_dis_z = 0.0
    max_input_d = 0.0
    max_input_z = 0.0
    cum_input_d = 0.0
    cum_input_z = 0.0

    if keep_history:
        hist_w = np.empty((n_steps, problem.dim_w))
        hist_d = np.empty((n_steps, problem.dim_d))
        hist_mu = np.empty((n_steps, problem.dim_mu))
        hist_z = np.empty((n_steps, problem.dim_z))
        hist_eta = np.empty(n_steps)
        hist_gw = np.zeros(n_steps)
        hist_gd = np.zeros(n_steps)
        hist_gmu = np.zeros(n_steps)
        hist_gz = np.zeros(n_steps)
        hist_dis_d = np.empty(n_steps)
        hist_dis_z = np.empty(n_steps)
        hist_phi = np.empty(n_steps)

    def record(t: int, dis_d: float, dis_z: float) -> None:
        phi_avg = float(problem.value(av_w, av_d, av_mu, av_z))
        gap = abs(phi_avg - phi_star) if phi_star is not None else nan
        if extra_metrics is not None:
            cost_err, violation = extra_metrics(t, av_w, av_d, av_mu, av_z)
        else:
            cost_err, violation = nan, nan
        rows.append(
            [
                float(t),
                rate(schedule, t),
                phi_avg,
                gap,
                dis_d,
                dis_z,
                float(cost_err),
                float(violation),
                cum_dis_d,
                cum_dis_z,
                max_input_d,
                max_input_z,
                cum_input_d,
                cum_input_z,
            ]
        )

    dis_d = block_disagreement(d, n)
    dis_z = block_disagreement(z, n)
    cum_dis_d += dis_d
    cum_dis_z += dis_z
    norm_d1, norm_z1 = float(np.linalg.norm(d)), float(np.linalg.norm(z))
    if keep_history:
        hist_w[0], hist_d[0], hist_mu[0], hist_z[0] = w, d, mu, z
        hist_eta[0] = rate(schedule, 1)
        hist_dis_d[0], hist_dis_z[0] = dis_d, dis_z
        hist_phi[0] = float(problem.value(w, d, mu, z))
    if 1 in mark_set:
        record(1, dis_d, dis_z)

    for t in range(1, n_steps):
        eta = rate(schedule, t)
        lap = sequence.laplacian_at(t)
        gw = _check_finite(problem.grad_w(w, d, mu, z), t)
        gd = _check_finite(problem.grad_d(w, d, mu, z), t)
        gmu = _check_finite(problem.grad_mu(w, d, mu, z), t)
        gz = _check_finite(problem.grad_z(w, d, mu, z), t)

        w = problem.w_set.project(w - eta * gw)
        d = problem.d_set.project(d - sigma * _consensus_term(lap, d, n) - eta * gd)
        mu = problem.mu_set.project(mu + eta * gmu)
        z = problem.z_set.project(z - sigma * _consensus_term(lap, z, n) + eta * gz)

        input_d = eta * float(np.linalg.norm(gd))
        input_z = eta * float(np.linalg.norm(gz))
        max_input_d = max(max_input_d, input_d)
        max_input_z = max(max_input_z, input_z)
        cum_input_d += input_d
        cum_input_z += input_z

        t_new = t + 1
        av_w = update_running_average(av_w, w, t_new)
        av_d = update_running_average(av_d, d, t_new)
        av_mu = update_running_average(av_mu, mu, t_new)
        av_z = update_running_average(av_z, z, t_new)

        dis_d = block_disagreement(d, n)
        dis_z = block_disagreement(z, n)
        cum_dis_d += dis_d
        cum_dis_z += dis_z

        if keep_history:
            hist_gw[t - 1], hist_gd[t - 1] = np.linalg.norm(gw), np.linalg.norm(gd)
            hist_gmu[t - 1], hist_gz[t - 1] = np.linalg.norm(gmu), np.linalg.norm(gz)
            hist_w[t], hist_d[t], hist_mu[t], hist_z[t] = w, d, mu, z
            hist_eta[t] = rate(schedule, t_new)
            hist_dis_d[t], hist_dis_z[t] = dis_d, dis_z
            hist_phi[t] = float(problem.value(w, d, mu, z))

        if t_new in mark_set:
            record(t_new, dis_d, dis_z)

    columns = {
        name: np.array([row[k] for row in rows])
        for k, name in enumerate(CSV_COLUMNS + ISS_COLUMNS)
    }
    full_meta = {
        "format": "saddlenet-trace",
        "version": 1,
        "n_agents": problem.n_agents,
        "dims": {
            "w": problem.dim_w,
            "D": problem.dim_d,
            "mu": problem.dim_mu,
            "z": problem.dim_z,
        },
        "sigma": sigma,
        "schedule": schedule_to_json(schedule),
        "n_steps": n_steps,
        "stride": stride,
        "phi_star": phi_star,
        "norm_D1": norm_d1,
        "norm_z1": norm_z1,
        "window_b": sequence.window_b,
        "delta": sequence.delta,
        "d_max": sequence.d_max,
        "lambda_bar": sequence.lambda_bar,
    }
    if meta:
        full_meta.update(meta)

    history = None
    if keep_history:
        history = RunHistory(
            w=hist_w,
            d=hist_d,
            mu=hist_mu,
            z=hist_z,
            eta=hist_eta,
            grad_norm_w=hist_gw,
            grad_norm_d=hist_gd,
            grad_norm_mu=hist_gmu,
            grad_norm_z=hist_gz,
            disagreement_d=hist_dis_d,
            disagreement_z=hist_dis_z,
            phi=hist_phi,
        )
    return RunTrace(meta=full_meta, columns=columns, history=history)
