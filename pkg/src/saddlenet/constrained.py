"""Distributed constrained convex optimization via saddle-point dynamics.

Agents minimize ``sum_i f_i(w_i, d)`` subject to the coupling constraint
``sum_i (g_i(w_i, d) + b_i) <= 0``, local sets ``w_i in W_i``, and agreement
on the global variable ``d``. The distributed Lagrangian uses per-agent
multiplier copies ``z_i`` restricted to a compact ball intersected with the
orthant, whose radius must exceed some optimal dual vector's norm for the
saddle points to match the constrained optima. The radius itself can be
computed by the agents with :func:`run_dual_bound_protocol`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .dynamics import NetworkState, SaddleProblem, update_running_average
from .graph import DigraphSequence, WeightedDigraph
from .projections import Box, ConvexSet, FullSpace, OrthantBall, Product, Replicated
from .univariate import golden_section_minimize, projected_subgradient_minimize

__all__ = [
    "SeparableProblem",
    "build_lagrangian_saddle",
    "cspsg_step",
    "SlaterPoint",
    "slater_components",
    "min_agreement_round",
    "max_agreement_round",
    "DualBoundRun",
    "run_dual_bound_protocol",
]


@dataclass(frozen=True)
class SeparableProblem:
    """Per-agent data of the constrained problem.

    Callables take ``(w_i, d_i)`` with ``w_i`` the agent's local block and
    ``d_i`` its copy of the global variable (a zero-length array when the
    problem has none). ``g[i]`` returns the agent's raw constraint vector in
    R^m; the effective constraint adds the fixed offset ``b_split[i]``, and
    the network constraint is the sum of effective constraints over agents.
    """

    f: tuple[Callable[..., float], ...]
    g: tuple[Callable[..., np.ndarray], ...]
    grad_f_w: tuple[Callable[..., np.ndarray], ...]
    jac_g_w: tuple[Callable[..., np.ndarray], ...]
    w_sets: tuple[ConvexSet, ...]
    b_split: np.ndarray
    m: int
    d_set: ConvexSet | None = None
    grad_f_d: tuple[Callable[..., np.ndarray], ...] | None = None
    jac_g_d: tuple[Callable[..., np.ndarray], ...] | None = None

    def __post_init__(self) -> None:
        n = len(self.f)
        if n < 1:
            raise ValueError("need at least one agent")
        for name in ("g", "grad_f_w", "jac_g_w", "w_sets"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} must have one entry per agent")
        b = np.asarray(self.b_split, dtype=float)
        if b.shape != (n, self.m):
            raise ValueError("b_split must have shape (n_agents, m)")
        b.setflags(write=False)
        object.__setattr__(self, "b_split", b)
        if (self.d_set is None) != (self.grad_f_d is None) or (self.d_set is None) != (
            self.jac_g_d is None
        ):
            raise ValueError("agreement-variable oracles must be all present or all absent")

    @property
    def n_agents(self) -> int:
        return len(self.f)

    @property
    def d_dim(self) -> int:
        return self.d_set.dim if self.d_set is not None else 0

    @property
    def w_dims(self) -> tuple[int, ...]:
        return tuple(s.dim for s in self.w_sets)

    @property
    def w_offsets(self) -> tuple[int, ...]:
        offsets = [0]
        for s in self.w_sets:
            offsets.append(offsets[-1] + s.dim)
        return tuple(offsets)

    def constraint(self, i: int, w_i: np.ndarray, d_i: np.ndarray) -> np.ndarray:
        """Effective constraint ``g_i(w_i, d_i) + b_i`` of agent ``i``."""
        return np.asarray(self.g[i](w_i, d_i), dtype=float) + self.b_split[i]


def _split_w(sep: SeparableProblem, w: np.ndarray) -> list[np.ndarray]:
    off = sep.w_offsets
    return [w[off[i] : off[i + 1]] for i in range(sep.n_agents)]


def _split_rows(x: np.ndarray, n: int) -> np.ndarray:
    return x.reshape(n, -1) if x.size else x.reshape(n, 0)


def build_lagrangian_saddle(sep: SeparableProblem, radius: float) -> SaddleProblem:
    """Saddle problem whose convex-concave function is the distributed Lagrangian.

    ``phi(w, d, mu, z) = sum_i f_i(w_i, d_i) + z_i @ (g_i(w_i, d_i) + b_i)``
    with each multiplier copy constrained to the orthant-ball of the given
    radius. When the radius exceeds the norm of an optimal dual vector of the
    constrained problem, saddle points of ``phi`` (with agreeing copies)
    correspond to its solutions.
    """
    if not (radius > 0.0 and math.isfinite(radius)):
        raise ValueError("multiplier radius must be positive and finite")
    n = sep.n_agents
    m = sep.m
    d_dim = sep.d_dim

    if all(isinstance(s, Box) for s in sep.w_sets):
        w_set: ConvexSet = Box(
            np.concatenate([s.lower for s in sep.w_sets]),  # type: ignore[union-attr]
            np.concatenate([s.upper for s in sep.w_sets]),  # type: ignore[union-attr]
        )
    else:
        w_set = Product(sep.w_sets)
    d_set: ConvexSet = Replicated(sep.d_set, n) if d_dim else FullSpace(0)
    z_set = Replicated(OrthantBall(m, radius), n)

    def value(w: np.ndarray, d: np.ndarray, mu: np.ndarray, z: np.ndarray) -> float:
        ws = _split_w(sep, w)
        ds = _split_rows(d, n)
        zs = z.reshape(n, m)
        total = 0.0
        for i in range(n):
            total += float(sep.f[i](ws[i], ds[i])) + float(zs[i] @ sep.constraint(i, ws[i], ds[i]))
        return total

    def grad_w(w: np.ndarray, d: np.ndarray, mu: np.ndarray, z: np.ndarray) -> np.ndarray:
        ws = _split_w(sep, w)
        ds = _split_rows(d, n)
        zs = z.reshape(n, m)
        parts = [
            np.asarray(sep.grad_f_w[i](ws[i], ds[i]), dtype=float)
            + np.asarray(sep.jac_g_w[i](ws[i], ds[i]), dtype=float).T @ zs[i]
            for i in range(n)
        ]
        return np.concatenate(parts) if parts else np.zeros(0)

    def grad_d(w: np.ndarray, d: np.ndarray, mu: np.ndarray, z: np.ndarray) -> np.ndarray:
        if not d_dim:
            return np.zeros(0)
        ws = _split_w(sep, w)
        ds = _split_rows(d, n)
        zs = z.reshape(n, m)
        parts = [
            np.asarray(sep.grad_f_d[i](ws[i], ds[i]), dtype=float)  # type: ignore[index]
            + np.asarray(sep.jac_g_d[i](ws[i], ds[i]), dtype=float).T @ zs[i]  # type: ignore[index]
            for i in range(n)
        ]
        return np.concatenate(parts)

    def grad_mu(w: np.ndarray, d: np.ndarray, mu: np.ndarray, z: np.ndarray) -> np.ndarray:
        return np.zeros(0)

    def grad_z(w: np.ndarray, d: np.ndarray, mu: np.ndarray, z: np.ndarray) -> np.ndarray:
        ws = _split_w(sep, w)
        ds = _split_rows(d, n)
        return np.concatenate([sep.constraint(i, ws[i], ds[i]) for i in range(n)])

    return SaddleProblem(
        n_agents=n,
        dim_w=sum(sep.w_dims),
        dim_d=n * d_dim,
        dim_mu=0,
        dim_z=n * m,
        value=value,
        grad_w=grad_w,
        grad_d=grad_d,
        grad_mu=grad_mu,
        grad_z=grad_z,
        w_set=w_set,
        d_set=d_set,
        mu_set=FullSpace(0),
        z_set=z_set,
    )


def cspsg_step(
    sep: SeparableProblem,
    state: NetworkState,
    graph: WeightedDigraph,
    sigma: float,
    eta: float,
    radius: float,
) -> NetworkState:
    """One step of the per-agent algorithm in message-passing form.

    Each agent ``i`` sees only its neighbors' copies ``d_j, z_j`` (weighted by
    ``a_ij``), its local oracles, and its own multiplier copy:

        w_i   <- P_{W_i}( w_i - eta (grad f_i + Dg_i^T z_i) )
        d_i   <- P_D( d_i + sigma sum_j a_ij (d_j - d_i) - eta (grad_d f_i + D_d g_i^T z_i) )
        z_i   <- P_{ball cap orthant}( z_i + sigma sum_j a_ij (z_j - z_i) + eta (g_i + b_i) )

    Mathematically identical to :func:`saddlenet.dynamics.step` applied to
    :func:`build_lagrangian_saddle`; written independently in neighbor-sum
    form as a cross-check of the stacked dynamics.
    """
    n = sep.n_agents
    m = sep.m
    d_dim = sep.d_dim
    a = graph.adjacency
    ws = _split_w(sep, state.w)
    ds = _split_rows(state.d, n)
    zs = state.z.reshape(n, m)
    z_ball = OrthantBall(m, radius)

    new_w = []
    new_d = np.empty_like(ds)
    new_z = np.empty_like(zs)
    for i in range(n):
        w_i, d_i, z_i = ws[i], ds[i], zs[i]
        gw = np.asarray(sep.grad_f_w[i](w_i, d_i), dtype=float)
        gw = gw + np.asarray(sep.jac_g_w[i](w_i, d_i), dtype=float).T @ z_i
        new_w.append(sep.w_sets[i].project(w_i - eta * gw))

        if d_dim:
            mix_d = (a[i][:, None] * (ds - d_i)).sum(axis=0)
            gd = np.asarray(sep.grad_f_d[i](w_i, d_i), dtype=float)  # type: ignore[index]
            gd = gd + np.asarray(sep.jac_g_d[i](w_i, d_i), dtype=float).T @ z_i  # type: ignore[index]
            new_d[i] = sep.d_set.project(d_i + sigma * mix_d - eta * gd)  # type: ignore[union-attr]

        mix_z = (a[i][:, None] * (zs - z_i)).sum(axis=0)
        new_z[i] = z_ball.project(z_i + sigma * mix_z + eta * sep.constraint(i, w_i, d_i))

    t_new = state.t + 1
    w_vec = np.concatenate(new_w) if new_w else np.zeros(0)
    d_vec = new_d.ravel()
    z_vec = new_z.ravel()
    return NetworkState(
        t=t_new,
        w=w_vec,
        d=d_vec,
        mu=state.mu.copy(),
        z=z_vec,
        av_w=update_running_average(state.av_w, w_vec, t_new),
        av_d=update_running_average(state.av_d, d_vec, t_new),
        av_mu=update_running_average(state.av_mu, state.mu, t_new),
        av_z=update_running_average(state.av_z, z_vec, t_new),
    )


# ---------------------------------------------------------------------------
# Slater points and local minimizations


def _minimize_on_set(
    fun: Callable[[np.ndarray], float],
    subgrad: Callable[[np.ndarray], np.ndarray],
    set_: ConvexSet,
    iterations: int = 20_000,
) -> tuple[np.ndarray, float]:
    """Minimize a convex function on a descriptor set.

    One-dimensional boxes get an exact golden-section solve; anything else
    falls back to projected subgradient from the projected origin.
    """
    if isinstance(set_, Box) and set_.dim == 1:
        lo, hi = float(set_.lower[0]), float(set_.upper[0])
        x, fx = golden_section_minimize(lambda v: fun(np.array([v])), lo, hi)
        return np.array([x]), fx
    x0 = set_.project(np.zeros(set_.dim))
    return projected_subgradient_minimize(fun, subgrad, set_, x0, iterations)


@dataclass(frozen=True)
class SlaterPoint:
    """Local Slater components and their certified margins.

    ``margins[i]`` is agent ``i``'s effective constraint value at its
    component ``w_tilde[i]``; ``total`` sums margins over agents and is
    strictly negative coordinatewise when the point certifies Slater's
    condition for the network constraint.
    """

    w_tilde: tuple[np.ndarray, ...]
    margins: np.ndarray
    total: np.ndarray


def slater_components(sep: SeparableProblem, iterations: int = 20_000) -> SlaterPoint:
    """Find local components whose summed constraint values are negative.

    Each agent independently minimizes the worst coordinate of its effective
    constraint over its local set (no coordination needed); the certificate
    is checked on the summed margins. Raises ``ValueError("Slater condition
    not certified")`` when some coordinate of the sum is nonnegative, which
    does not prove Slater fails, only that this decentralized strategy could
    not certify it.
    """
    if sep.d_dim:
        raise ValueError("slater_components requires a problem without agreement variables")
    empty = np.zeros(0)
    components: list[np.ndarray] = []
    margins = np.empty((sep.n_agents, sep.m))
    for i in range(sep.n_agents):

        def worst(w: np.ndarray, i: int = i) -> float:
            return float(np.max(sep.constraint(i, w, empty)))

        def worst_subgrad(w: np.ndarray, i: int = i) -> np.ndarray:
            values = sep.constraint(i, w, empty)
            row = int(np.argmax(values))
            return np.asarray(sep.jac_g_w[i](w, empty), dtype=float)[row]

        w_i, _ = _minimize_on_set(worst, worst_subgrad, sep.w_sets[i], iterations)
        components.append(w_i)
        margins[i] = sep.constraint(i, w_i, empty)
    total = margins.sum(axis=0)
    if not np.all(total < 0.0):
        raise ValueError("Slater condition not certified")
    return SlaterPoint(w_tilde=tuple(components), margins=margins, total=total)


def _local_dual_value(
    sep: SeparableProblem, i: int, z_bar: np.ndarray, iterations: int = 20_000
) -> float:
    """``q_i(z_bar) = min over W_i of f_i(w) + z_bar @ (g_i(w) + b_i)``."""
    empty = np.zeros(0)

    def fun(w: np.ndarray) -> float:
        return float(sep.f[i](w, empty)) + float(z_bar @ sep.constraint(i, w, empty))

    def subgrad(w: np.ndarray) -> np.ndarray:
        return (
            np.asarray(sep.grad_f_w[i](w, empty), dtype=float)
            + np.asarray(sep.jac_g_w[i](w, empty), dtype=float).T @ z_bar
        )

    _, value = _minimize_on_set(fun, subgrad, sep.w_sets[i], iterations)
    return value


# ---------------------------------------------------------------------------
# distributed bounding of the optimal dual set


def _neighborhood_reduce(values: np.ndarray, graph: WeightedDigraph, reducer) -> np.ndarray:
    out = np.empty_like(values)
    a = graph.adjacency
    for i in range(graph.n):
        listened = np.nonzero(a[i] > 0.0)[0]
        idx = np.concatenate(([i], listened))
        out[i] = reducer(values[idx], axis=0)
    return out


def min_agreement_round(values: np.ndarray, graph: WeightedDigraph) -> np.ndarray:
    """One synchronous round of coordinatewise min over in-neighborhoods.

    ``values`` has one row (or one scalar) per agent; agent ``i``'s new value
    is the minimum over itself and every agent it listens to. Repeating for
    ``(N - 1) * B`` rounds over a jointly connected sequence propagates the
    network minimum to everyone.
    """
    values = np.asarray(values, dtype=float)
    if values.shape[0] != graph.n:
        raise ValueError("values must have one entry per agent")
    return _neighborhood_reduce(values, graph, np.min)


def max_agreement_round(values: np.ndarray, graph: WeightedDigraph) -> np.ndarray:
    """One synchronous round of coordinatewise max over in-neighborhoods."""
    values = np.asarray(values, dtype=float)
    if values.shape[0] != graph.n:
        raise ValueError("values must have one entry per agent")
    return _neighborhood_reduce(values, graph, np.max)


def _sign_plus(x: np.ndarray) -> np.ndarray:
    """Sign with the convention ``sign(0) = +1`` (conservative for termination)."""
    return np.where(x >= 0.0, 1.0, -1.0)


@dataclass(frozen=True)
class DualBoundRun:
    """Everything the dual-set bounding protocol produced.

    ``gamma_lower`` underestimates the true constraint margin
    ``gamma = min_l (-sum_i (g_i(w_tilde_i) + b_i)_l)`` at any finite
    truncation, so ``radius`` upper-bounds the norm of some optimal dual
    vector and is safe to use as the multiplier ball radius.
    """

    w_tilde: tuple[np.ndarray, ...]
    y_initial: np.ndarray
    f_slater: np.ndarray
    q_local: np.ndarray
    k_star: np.ndarray
    k_star_star: int
    agreement_rounds: int
    rounds_total: int
    y_agreed: np.ndarray
    f_agreed: np.ndarray
    q_agreed: np.ndarray
    y_hat: np.ndarray
    gamma_agents: np.ndarray
    radii: np.ndarray
    gamma_lower: float
    radius: float
    z_bar: np.ndarray
    safety_factor: float


def run_dual_bound_protocol(
    sep: SeparableProblem,
    sequence: DigraphSequence,
    sigma: float,
    *,
    z_bar: np.ndarray | None = None,
    safety_factor: float = 0.99,
    round_cap: int = 1_000_000,
    iterations: int = 20_000,
) -> DualBoundRun:
    """Distributed computation of a multiplier-ball radius bounding the dual set.

    Stage 1: each agent finds its Slater component ``w_tilde_i`` and seeds
    ``y_i(0) = g_i(w_tilde_i) + b_i``.

    Stage 2: Laplacian consensus on ``y`` runs alongside a sign tracker
    ``s_i(k+1) = s_i(k) - sigma (L_k s(k))_i + sign(y_i(k+1)) - sign(y_i(k))``
    seeded with ``s_i(0) = sign(y_i(0))``. Weight balance preserves
    ``sum_i s_i(k) = sum_i sign(y_i(k))``, so when ``N s_i <= -(N - 1)``
    holds for every agent *at the same round* the sign sum is at most
    ``-(N - 1)`` and, by parity of a sum of N signs, exactly ``-N``: every
    ``y_i(k)`` is negative. Stage (ii) freezes ``y`` at the first such round
    ``k_star_star``; ``k_star_i`` reports the first round agent ``i``'s own
    certificate held. Certificates from different rounds never mix, because
    a tracker entry can lapse after a neighbour's sign flips.

    Stage 3: after the simultaneous round, ``(N - 1) B`` rounds of coordinatewise
    MAX agreement on the frozen ``y`` give every agent
    ``y_hat_l = N max_j y_j_l(k_star_star) >= sum_i y_i_l(k_star_star)``, and
    the same rounds carry max-agreement on ``f_i(w_tilde_i)`` and
    min-agreement on the local dual values ``q_i(z_bar)``. Since consensus
    preserves the sum of ``y`` and max dominates mean, ``gamma_lower =
    safety_factor * min_l(-y_hat_l)`` underestimates the true margin, and

        radius = N (max_j f_j(w_tilde_j) - min_j q_j(z_bar)) / gamma_lower

    upper-bounds the norm of an optimal dual vector.
    """
    if sep.d_dim:
        raise ValueError("the protocol requires a problem without agreement variables")
    n = sequence.n
    if n != sep.n_agents:
        raise ValueError("graph sequence node count does not match problem agents")
    if not (sigma > 0.0 and math.isfinite(sigma)):
        raise ValueError("sigma must be positive and finite")
    if sequence.d_max > 0.0 and sigma * sequence.d_max > 1.0 + 1e-12:
        raise ValueError("sigma exceeds the feasible window for this sequence")
    if not 0.0 < safety_factor <= 1.0:
        raise ValueError("safety_factor must lie in (0, 1]")
    z_bar = np.zeros(sep.m) if z_bar is None else np.asarray(z_bar, dtype=float)
    if z_bar.shape != (sep.m,) or np.any(z_bar < 0.0):
        raise ValueError("z_bar must be a nonnegative vector of length m")

    slater = slater_components(sep, iterations)
    empty = np.zeros(0)
    f_vals = np.array([float(sep.f[i](slater.w_tilde[i], empty)) for i in range(n)])
    q_vals = np.array([_local_dual_value(sep, i, z_bar, iterations) for i in range(n)])

    y = slater.margins.copy()
    signs = _sign_plus(y)
    s = signs.copy()
    k_star = np.full(n, -1, dtype=int)
    threshold = -(n - 1.0)

    k = 0
    while True:
        done = np.all(n * s <= threshold, axis=1)
        newly = done & (k_star < 0)
        k_star[newly] = k
        if np.all(done):
            break
        if k >= round_cap:
            raise RuntimeError("sign tracker did not terminate within round_cap rounds")
        lap = sequence.laplacian_at(k + 1)
        y = y - sigma * (lap @ y)
        new_signs = _sign_plus(y)
        s = s - sigma * (lap @ s) + (new_signs - signs)
        signs = new_signs
        k += 1

    k_star_star = k
    agreement_rounds = (n - 1) * sequence.window_b
    y_agree = y.copy()
    f_agree = f_vals.copy()
    q_agree = q_vals.copy()
    for r in range(agreement_rounds):
        graph = sequence.graph_at(k_star_star + 1 + r)
        y_agree = max_agreement_round(y_agree, graph)
        f_agree = max_agreement_round(f_agree, graph)
        q_agree = min_agreement_round(q_agree, graph)
    if np.any(y_agree != y_agree[0]) or np.any(f_agree != f_agree[0]) or np.any(q_agree != q_agree[0]):
        raise RuntimeError("agreement phase did not reach network consensus")

    # Each agent forms its radius from its own agreed copies; the values are
    # bitwise identical across the network because max/min agreement copies
    # floats verbatim.
    gamma_agents = safety_factor * np.min(-n * y_agree, axis=1)
    gamma_lower = float(gamma_agents[0])
    if gamma_lower <= 0.0:
        raise ValueError("protocol produced non-positive gamma")
    radii = n * (f_agree - q_agree) / gamma_agents
    return DualBoundRun(
        w_tilde=slater.w_tilde,
        y_initial=slater.margins,
        f_slater=f_vals,
        q_local=q_vals,
        k_star=k_star,
        k_star_star=k_star_star,
        agreement_rounds=agreement_rounds,
        rounds_total=k_star_star + agreement_rounds,
        y_agreed=y_agree,
        f_agreed=f_agree,
        q_agreed=q_agree,
        y_hat=n * y_agree[0],
        gamma_agents=gamma_agents,
        radii=radii,
        gamma_lower=gamma_lower,
        radius=float(radii[0]),
        z_bar=z_bar,
        safety_factor=safety_factor,
    )
