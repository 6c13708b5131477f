"""Convergence-bound constants and runnable consistency checks.

Three layers of guarantees are computable here:

* input-to-state stability of the consensus blocks: the disagreement of the
  per-agent copies is bounded by a geometric decay from the initial
  disagreement plus a gain ``C_u`` times the largest disturbance
  ``eta_s * ||g_s||`` injected so far, and cumulatively by ``C_u`` times the
  accumulated disturbances;
* a saddle-point evaluation certificate for any feasible probe point in
  terms of the computable function ``u`` of the run history;
* the ergodic convergence envelope ``(Cbar_wD + Cbar_muz) / (2 sqrt(t - 1))``
  for the doubling-trick schedule, with every constant spelled out from
  problem data.

``check_iss_bounds`` and ``check_lemma42`` evaluate these inequalities on an
actual run and report margins; they never raise on a violation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constrained import SeparableProblem
from .dynamics import RunTrace, SaddleProblem, block_disagreement
from .projections import Box

__all__ = [
    "DOUBLING_FACTOR",
    "c_u",
    "contraction_factor",
    "BoundConstants",
    "cdoubling",
    "theorem_bound",
    "corollary_constants",
    "disagreement",
    "cumulative_disagreement",
    "IssReport",
    "check_iss_bounds",
    "Lemma42Report",
    "check_lemma42",
]

# sum_{m>=0} 2^(-m/2) = sqrt(2)/(sqrt(2)-1): the doubling-trick epochs form a
# geometric series with this total, which converts a per-epoch bound into the
# anytime envelope.
DOUBLING_FACTOR = math.sqrt(2.0) / (math.sqrt(2.0) - 1.0)


def contraction_factor(delta_tilde: float, n_agents: int) -> float:
    """Per-window geometric factor ``1 - delta_tilde / (4 N^2)``."""
    if not 0.0 < delta_tilde < 1.0:
        raise ValueError("delta_tilde must lie strictly between 0 and 1")
    if n_agents < 2:
        raise ValueError("contraction is only defined for at least two agents")
    return 1.0 - delta_tilde / (4.0 * n_agents * n_agents)


def c_u(delta_tilde: float, n_agents: int, window_b: int) -> float:
    """ISS gain from per-step disturbances to consensus disagreement.

    ``C_u = (2^5 / 3^2) / (1 - rho^(1/B))`` with
    ``rho = 1 - delta_tilde / (4 N^2)``; grows like ``4 B N^2 / delta_tilde``
    as the contraction weakens.
    """
    if not isinstance(window_b, int) or window_b < 1:
        raise ValueError("window_b must be a positive integer")
    rho = contraction_factor(delta_tilde, n_agents)
    return (2.0**5 / 3.0**2) / (1.0 - rho ** (1.0 / window_b))


@dataclass(frozen=True)
class BoundConstants:
    """Radii and subgradient-norm bounds entering the convergence envelope.

    ``b_*`` bound iterate norms per block, ``h_*`` bound the corresponding
    subgradient norms; ``sigma, lambda_bar, delta_tilde, window_b, n_agents``
    describe the consensus side. Derived quantities are exposed as
    properties.
    """

    b_w: float
    b_d: float
    b_mu: float
    b_z: float
    h_w: float
    h_d: float
    h_mu: float
    h_z: float
    sigma: float
    lambda_bar: float
    delta_tilde: float
    n_agents: int
    window_b: int

    @property
    def rho(self) -> float:
        return contraction_factor(self.delta_tilde, self.n_agents)

    @property
    def c_u_value(self) -> float:
        return c_u(self.delta_tilde, self.n_agents, self.window_b)

    @property
    def c_wd(self) -> float:
        """Constant-rate bound constant for the convex blocks."""
        return (
            4.0 * (self.b_w**2 + self.b_d**2)
            + 6.0 * (self.h_w**2 + self.h_d**2)
            + self.h_d * (3.0 + self.sigma * self.lambda_bar) * self.c_u_value * (self.b_d + 2.0 * self.h_d)
        )

    @property
    def c_mz(self) -> float:
        """Constant-rate bound constant for the concave blocks."""
        return (
            4.0 * (self.b_mu**2 + self.b_z**2)
            + 6.0 * (self.h_mu**2 + self.h_z**2)
            + self.h_z * (3.0 + self.sigma * self.lambda_bar) * self.c_u_value * (self.b_z + 2.0 * self.h_z)
        )

    @property
    def cbar_wd(self) -> float:
        return cdoubling(self.c_wd)

    @property
    def cbar_mz(self) -> float:
        return cdoubling(self.c_mz)


def cdoubling(c: float) -> float:
    """Doubling-trick envelope constant ``sqrt(2)/(sqrt(2)-1) * c``."""
    return DOUBLING_FACTOR * c


def theorem_bound(t: int, consts: BoundConstants) -> float:
    """Saddle-gap envelope at row ``t``: ``(cbar_wd + cbar_mz) / (2 sqrt(t-1))``.

    Valid for the running averages over iterates ``1..t`` under the doubling
    trick (the stated bound for the average over ``1..t`` has ``sqrt(t)``;
    using ``sqrt(t - 1)`` keeps it an upper envelope for either indexing
    convention). Defined for ``t >= 2``.
    """
    if t < 2:
        raise ValueError("the envelope is defined for t >= 2")
    return (consts.cbar_wd + consts.cbar_mz) / (2.0 * math.sqrt(t - 1.0))


def _sup_abs_constraint(sep: SeparableProblem, i: int, iterations: int) -> float:
    """Upper bound on ``sup_{w in W_i} ||g_i(w) + b_i||`` (coordinatewise).

    The max of each convex coordinate over a box is attained at a vertex;
    the min is certified by the scalar/subgradient minimizer. Combining
    ``max(|max|, |min|)`` per coordinate gives an exact sup for m = 1 and a
    valid upper bound in general.
    """
    from .constrained import _minimize_on_set  # local import to avoid a cycle at module load

    set_ = sep.w_sets[i]
    if not isinstance(set_, Box):
        raise ValueError("constraint norm bound needs box local sets; pass h_z explicitly")
    empty = np.zeros(0)
    vertices = set_.vertices()
    values = np.stack([sep.constraint(i, v, empty) for v in vertices])
    upper = values.max(axis=0)
    total = 0.0
    for l in range(sep.m):

        def coord(w: np.ndarray, l: int = l) -> float:
            return float(sep.constraint(i, w, empty)[l])

        def coord_subgrad(w: np.ndarray, l: int = l) -> np.ndarray:
            return np.asarray(sep.jac_g_w[i](w, empty), dtype=float)[l]

        _, lower = _minimize_on_set(coord, coord_subgrad, set_, iterations)
        total += max(abs(float(upper[l])), abs(lower)) ** 2
    return math.sqrt(total)


def corollary_constants(
    sep: SeparableProblem,
    radius: float,
    *,
    sigma: float,
    lambda_bar: float,
    delta_tilde: float,
    window_b: int,
    h_f_w: float,
    h_g_w: float,
    h_f_d: float = 0.0,
    h_g_d: float = 0.0,
    h_z: float | None = None,
    iterations: int = 20_000,
) -> BoundConstants:
    """Envelope constants for the Lagrangian saddle problem of ``sep``.

    ``h_f_w`` bounds ``||grad_w f_i||`` and ``h_g_w`` the norm of any row of
    the constraint Jacobian, uniformly over agents and local sets (similarly
    ``h_f_d, h_g_d`` for the agreement variable); these are problem data the
    caller knows analytically. Block radii come from the set descriptors:

        b_w = sqrt(sum_i diam(W_i)^2),  b_d = sqrt(N) diam(D),
        b_z = sqrt(N) * radius,          b_mu = h_mu = 0,
        h_w = sqrt(N) (h_f_w + radius sqrt(m) h_g_w),  h_d analogously,
        h_z^2 = sum_i sup_{w in W_i} ||g_i(w) + b_i||^2.

    The ``h_z`` sup is computed from the descriptors when not supplied.
    """
    if not (radius > 0.0 and math.isfinite(radius)):
        raise ValueError("multiplier radius must be positive and finite")
    n = sep.n_agents
    diams = [s.diameter() for s in sep.w_sets]
    if not all(math.isfinite(dm) for dm in diams):
        raise ValueError("unbounded local set descriptor")
    b_w = math.sqrt(sum(dm**2 for dm in diams))
    if sep.d_dim:
        d_diam = sep.d_set.diameter()  # type: ignore[union-attr]
        if not math.isfinite(d_diam):
            raise ValueError("unbounded agreement set descriptor")
        b_d = math.sqrt(n) * d_diam
        h_d = math.sqrt(n) * (h_f_d + radius * math.sqrt(sep.m) * h_g_d)
    else:
        b_d = 0.0
        h_d = 0.0
    h_w = math.sqrt(n) * (h_f_w + radius * math.sqrt(sep.m) * h_g_w)
    if h_z is None:
        if sep.d_dim:
            raise ValueError("automatic h_z needs a problem without agreement variables")
        h_z = math.sqrt(sum(_sup_abs_constraint(sep, i, iterations) ** 2 for i in range(n)))
    return BoundConstants(
        b_w=b_w,
        b_d=b_d,
        b_mu=0.0,
        b_z=math.sqrt(n) * radius,
        h_w=h_w,
        h_d=h_d,
        h_mu=0.0,
        h_z=float(h_z),
        sigma=sigma,
        lambda_bar=lambda_bar,
        delta_tilde=delta_tilde,
        n_agents=n,
        window_b=window_b,
    )


def disagreement(x: np.ndarray, n_agents: int) -> float:
    """Norm of the deviation of stacked per-agent copies from their mean."""
    return block_disagreement(np.asarray(x, dtype=float), n_agents)


def cumulative_disagreement(trace: RunTrace) -> dict[str, np.ndarray]:
    """Recorded cumulative disagreement series ``sum_{s<=t} ||L_K x_s||``."""
    return {
        "t": trace.column("t"),
        "D": trace.column("cum_disagreement_D"),
        "z": trace.column("cum_disagreement_z"),
    }


def _ratios(actual: np.ndarray, bound: np.ndarray) -> np.ndarray:
    out = np.zeros_like(actual)
    positive = bound > 0.0
    out[positive] = actual[positive] / bound[positive]
    out[~positive & (actual > 0.0)] = math.inf
    return out


@dataclass(frozen=True)
class IssReport:
    """Outcome of checking the consensus ISS inequalities on a trace.

    Ratios are ``actual / bound``; the check passes when every ratio is at
    most 1 (up to float slack). ``n_rows`` counts the trace rows examined.
    """

    passed: bool
    n_rows: int
    c_u_value: float
    rho: float
    worst_pointwise_d: float
    worst_pointwise_z: float
    worst_cumulative_d: float
    worst_cumulative_z: float


def check_iss_bounds(trace: RunTrace, delta_tilde: float | None = None) -> IssReport:
    """Verify the pointwise and cumulative ISS bounds on a recorded trace.

    Pointwise, for every recorded row ``t``:

        ||L_K x_t|| <= (2^4 / 3^2) ||x_1|| rho^ceil((t-1)/B)
                       + C_u max_{s <= t-1} eta_s ||g_s||

    and cumulatively ``sum_{s<=t} ||L_K x_s|| <= C_u (||x_1|| / 2 +
    sum_{s<=t-1} eta_s ||g_s||)``, for both consensus blocks. The trace
    carries all accumulators, so this runs from a loaded CSV. ``delta_tilde``
    defaults to the value stored in the trace metadata.
    """
    n = int(trace.meta["n_agents"])
    window_b = int(trace.meta["window_b"])
    ts = trace.column("t")
    if n < 2:
        return IssReport(True, len(ts), math.inf, 1.0, 0.0, 0.0, 0.0, 0.0)
    if delta_tilde is None:
        delta_tilde = trace.meta.get("delta_tilde")
        if delta_tilde is None:
            raise ValueError("delta_tilde not given and absent from trace metadata")
    gain = c_u(float(delta_tilde), n, window_b)
    rho = contraction_factor(float(delta_tilde), n)
    decay = rho ** np.ceil((ts - 1.0) / window_b)
    slack = 1.0 + 1e-9

    worst = {}
    for block, norm_key in (("D", "norm_D1"), ("z", "norm_z1")):
        norm1 = float(trace.meta[norm_key])
        point_bound = (2.0**4 / 3.0**2) * norm1 * decay + gain * trace.column(f"max_input_{block}")
        cum_bound = gain * (norm1 / 2.0 + trace.column(f"cum_input_{block}"))
        worst[f"p{block}"] = float(np.max(_ratios(trace.column(f"disagreement_{block}"), point_bound), initial=0.0))
        worst[f"c{block}"] = float(np.max(_ratios(trace.column(f"cum_disagreement_{block}"), cum_bound), initial=0.0))

    passed = all(v <= slack for v in worst.values())
    return IssReport(
        passed=passed,
        n_rows=len(ts),
        c_u_value=gain,
        rho=rho,
        worst_pointwise_d=worst["pD"],
        worst_pointwise_z=worst["pz"],
        worst_cumulative_d=worst["cD"],
        worst_cumulative_z=worst["cz"],
    )


@dataclass(frozen=True)
class Lemma42Report:
    """Both sides of the saddle evaluation certificate at a probe point.

    The convex-side claim is ``sum_{s<=t} phi_s - t * phi(w_p, d_p, av_mu,
    av_z) <= u_convex / 2`` and the concave-side claim is ``sum_{s<=t} phi_s
    - t * phi(av_w, av_d, mu_p, z_p) >= -u_concave / 2``, with averages over
    iterates ``1..t``. Margins are ``bound - value`` (convex side) and
    ``value - bound`` (concave side): nonnegative means the claim holds.
    """

    t: int
    passed: bool
    u_convex: float
    u_concave: float
    lhs_convex: float
    lhs_concave: float
    margin_convex: float
    margin_concave: float


def _u_function(
    t: int,
    iterates_x: np.ndarray,
    iterates_y: np.ndarray,
    probe_x: np.ndarray,
    probe_y: np.ndarray,
    eta: np.ndarray,
    grad_norm_x: np.ndarray,
    grad_norm_y: np.ndarray,
    dis_y: np.ndarray,
    dis_probe_y: float,
    sigma: float,
    lambda_bar: float,
    n_agents: int,
) -> float:
    """The computable certificate function of a run prefix and a probe pair.

    ``x`` is the non-consensus member of the pair (w, or mu), ``y`` the
    consensus member (the per-agent copies D, or z); ``dis_y`` holds
    ``||L_K y_s||`` and the mean-stack of ``y_s`` replaces ``y_s`` in the
    distance terms.
    """
    if iterates_y.shape[1]:
        mats = iterates_y[: t + 1].reshape(t + 1, n_agents, -1)
        means = mats.mean(axis=1, keepdims=True)
        stacked = np.broadcast_to(means, mats.shape).reshape(t + 1, -1)
    else:
        stacked = iterates_y[: t + 1]
    dist_sq = np.array(
        [
            float(np.sum((iterates_x[s] - probe_x) ** 2) + np.sum((stacked[s] - probe_y) ** 2))
            for s in range(1, t)
        ]
    )
    inv_eta_jumps = 1.0 / eta[1:t] - 1.0 / eta[: t - 1]
    term_rate = float(dist_sq @ inv_eta_jumps) if t >= 2 else 0.0
    term_init = (2.0 / eta[0]) * (
        float(np.sum(iterates_x[0] ** 2))
        + float(np.sum(probe_x**2))
        + float(np.sum(iterates_y[0] ** 2))
        + float(np.sum(probe_y**2))
    )
    term_grad = 6.0 * float(eta[:t] @ (grad_norm_x[:t] ** 2 + grad_norm_y[:t] ** 2))
    term_cross = 2.0 * (2.0 + sigma * lambda_bar) * float(grad_norm_y[:t] @ dis_y[:t])
    term_probe = 2.0 * dis_probe_y * float(np.sum(grad_norm_y[:t]))
    return term_rate + term_init + term_grad + term_cross + term_probe


def check_lemma42(
    trace: RunTrace,
    problem: SaddleProblem,
    probe: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray],
    t: int | None = None,
    feas_tol: float = 1e-9,
) -> Lemma42Report:
    """Evaluate the saddle evaluation certificate on a run with history.

    ``probe`` is a feasible point ``(w_p, d_p, mu_p, z_p)`` (checked against
    the problem's descriptors); ``t`` defaults to the largest prefix with a
    recorded subgradient, ``n_steps - 1``. Requires the trace to have been
    produced with ``keep_history=True``.
    """
    if trace.history is None:
        raise ValueError("trace has no history; rerun with keep_history=True")
    hist = trace.history
    n_steps = hist.w.shape[0]
    if t is None:
        t = n_steps - 1
    if not 1 <= t <= n_steps - 1:
        raise ValueError("t must lie in [1, n_steps - 1]")
    w_p, d_p, mu_p, z_p = (np.asarray(p, dtype=float) for p in probe)
    for block, set_ in ((w_p, problem.w_set), (d_p, problem.d_set), (mu_p, problem.mu_set), (z_p, problem.z_set)):
        if set_.residual(block) > feas_tol:
            raise ValueError("infeasible probe point")

    sigma = float(trace.meta["sigma"])
    lambda_bar = float(trace.meta["lambda_bar"])
    n = problem.n_agents
    sum_phi = float(np.sum(hist.phi[:t]))
    av_w = hist.w[:t].mean(axis=0)
    av_d = hist.d[:t].mean(axis=0)
    av_mu = hist.mu[:t].mean(axis=0)
    av_z = hist.z[:t].mean(axis=0)

    u_convex = _u_function(
        t,
        hist.w,
        hist.d,
        w_p,
        d_p,
        hist.eta,
        hist.grad_norm_w,
        hist.grad_norm_d,
        hist.disagreement_d,
        block_disagreement(d_p, n),
        sigma,
        lambda_bar,
        n,
    )
    u_concave = _u_function(
        t,
        hist.mu,
        hist.z,
        mu_p,
        z_p,
        hist.eta,
        hist.grad_norm_mu,
        hist.grad_norm_z,
        hist.disagreement_z,
        block_disagreement(z_p, n),
        sigma,
        lambda_bar,
        n,
    )
    lhs_convex = sum_phi - t * float(problem.value(w_p, d_p, av_mu, av_z))
    lhs_concave = sum_phi - t * float(problem.value(av_w, av_d, mu_p, z_p))
    margin_convex = u_convex / 2.0 - lhs_convex
    margin_concave = lhs_concave + u_concave / 2.0
    tol = 1e-8 * max(1.0, abs(u_convex), abs(u_concave))
    return Lemma42Report(
        t=t,
        passed=bool(margin_convex >= -tol and margin_concave >= -tol),
        u_convex=u_convex,
        u_concave=u_concave,
        lhs_convex=lhs_convex,
        lhs_concave=lhs_concave,
        margin_convex=margin_convex,
        margin_concave=margin_concave,
    )
