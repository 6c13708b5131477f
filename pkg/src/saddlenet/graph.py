"""Weighted digraphs, time-varying sequences, and consensus-related constants.

Conventions used throughout the package:

* A weighted digraph on ``n`` nodes is stored as a dense adjacency matrix
  ``A`` with ``A[i, j] >= 0`` the weight agent ``i`` places on information
  received from agent ``j``, and zero diagonal.
* The (out-degree) Laplacian is ``L = diag(A @ 1) - A``, so ``L @ 1 = 0``.
* Sequences are periodic and 1-indexed in time: the graph active at step
  ``t >= 1`` of a sequence with period ``P`` is ``graphs[(t - 1) % P]``.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "WeightedDigraph",
    "DigraphSequence",
    "laplacian",
    "is_weight_balanced",
    "is_strongly_connected",
    "union",
    "check_joint_connectivity",
    "nondegeneracy_delta",
    "max_out_degree",
    "max_degree_count",
    "sigma_max_bound",
    "consensus_stepsize_interval",
    "watts_strogatz",
    "complete_digraph",
    "graph_to_json",
    "graph_from_json",
    "sequence_to_json",
    "sequence_from_json",
]


@dataclass(frozen=True)
class WeightedDigraph:
    """A fixed weighted digraph given by its dense adjacency matrix."""

    adjacency: np.ndarray

    def __post_init__(self) -> None:
        a = np.asarray(self.adjacency, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("adjacency must be a square matrix")
        if a.shape[0] == 0:
            raise ValueError("graph must have at least one node")
        if not np.all(np.isfinite(a)):
            raise ValueError("adjacency weights must be finite")
        if np.any(a < 0.0):
            raise ValueError("adjacency weights must be nonnegative")
        if np.any(np.diagonal(a) != 0.0):
            raise ValueError("self-loops are not allowed (diagonal must be zero)")
        a = a.copy()
        a.setflags(write=False)
        object.__setattr__(self, "adjacency", a)

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def edges(self) -> list[tuple[int, int, float]]:
        """Directed edges ``(i, j, weight)`` with positive weight, sorted."""
        ii, jj = np.nonzero(self.adjacency)
        return [(int(i), int(j), float(self.adjacency[i, j])) for i, j in zip(ii, jj)]


def laplacian(graph: WeightedDigraph) -> np.ndarray:
    """Out-degree Laplacian ``diag(A @ 1) - A`` of the graph."""
    a = graph.adjacency
    return np.diag(a.sum(axis=1)) - a


def is_weight_balanced(graph: WeightedDigraph, tol: float = 1e-12) -> bool:
    """True when in-degree equals out-degree at every node up to ``tol``.

    Equivalently the column sums of the Laplacian vanish, which is what makes
    Laplacian averaging preserve the network mean of each consensus block.
    """
    a = graph.adjacency
    return bool(np.max(np.abs(a.sum(axis=1) - a.sum(axis=0)), initial=0.0) <= tol)


def union(graphs: list[WeightedDigraph] | tuple[WeightedDigraph, ...]) -> WeightedDigraph:
    """Union graph: edge present when present in any member; weights summed."""
    if not graphs:
        raise ValueError("union of an empty collection of graphs")
    n = graphs[0].n
    total = np.zeros((n, n))
    for g in graphs:
        if g.n != n:
            raise ValueError("graphs in a sequence must share the node count")
        total = total + g.adjacency
    return WeightedDigraph(total)


def _reachable_from_root(adjacency: np.ndarray) -> np.ndarray:
    """Boolean mask of nodes reachable from node 0 along positive-weight edges."""
    n = adjacency.shape[0]
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    queue = deque([0])
    while queue:
        i = queue.popleft()
        for j in np.nonzero(adjacency[i] > 0.0)[0]:
            if not seen[j]:
                seen[j] = True
                queue.append(int(j))
    return seen


def is_strongly_connected(graph: WeightedDigraph) -> bool:
    """True when every node reaches every other along positive-weight edges.

    Breadth-first search from node 0 on the graph and on its transpose; the
    graph is strongly connected iff both searches reach all nodes.
    """
    a = graph.adjacency
    if graph.n == 1:
        return True
    return bool(_reachable_from_root(a).all() and _reachable_from_root(a.T).all())


def check_joint_connectivity(
    graphs: list[WeightedDigraph] | tuple[WeightedDigraph, ...], window_b: int
) -> bool:
    """True when every length-``window_b`` window union is strongly connected.

    The sequence is taken periodic, so checking the ``P`` windows starting at
    ``t = k * window_b + 1`` for ``k = 0..P-1`` covers every alignment.
    """
    if not isinstance(window_b, int) or window_b < 1:
        raise ValueError("window_b must be a positive integer")
    if not graphs:
        raise ValueError("empty graph sequence")
    period = len(graphs)
    for k in range(period):
        start = k * window_b  # 0-based offset of step t = k*window_b + 1
        members = [graphs[(start + j) % period] for j in range(window_b)]
        if not is_strongly_connected(union(members)):
            return False
    return True


def nondegeneracy_delta(
    graphs: list[WeightedDigraph] | tuple[WeightedDigraph, ...],
) -> float:
    """Smallest positive edge weight appearing anywhere in the sequence.

    Raises ``ValueError("no edges")`` when no graph has a positive weight,
    except for the trivial single-node network where 0.0 is returned.
    """
    if not graphs:
        raise ValueError("empty graph sequence")
    best = math.inf
    for g in graphs:
        positive = g.adjacency[g.adjacency > 0.0]
        if positive.size:
            best = min(best, float(positive.min()))
    if math.isinf(best):
        if graphs[0].n == 1:
            return 0.0
        raise ValueError("no edges")
    return best


def max_out_degree(
    graphs: list[WeightedDigraph] | tuple[WeightedDigraph, ...],
) -> float:
    """Largest weighted out-degree ``max_i sum_j A[i, j]`` over the sequence."""
    if not graphs:
        raise ValueError("empty graph sequence")
    return max(float(g.adjacency.sum(axis=1).max()) for g in graphs)


def max_degree_count(
    graphs: list[WeightedDigraph] | tuple[WeightedDigraph, ...],
) -> int:
    """Largest number of out-neighbors of any node over the sequence."""
    if not graphs:
        raise ValueError("empty graph sequence")
    return max(int((g.adjacency > 0.0).sum(axis=1).max()) for g in graphs)


def _power_method_sigma_max(lap: np.ndarray, rel_tol: float, max_iter: int) -> float:
    """Largest singular value of ``lap`` by power iteration on ``lap.T @ lap``.

    The start vector is a normalized ramp: deterministic, never parallel to
    the all-ones null vector of the Laplacian gram matrix, and generically
    not orthogonal to the top eigenspace.
    """
    n = lap.shape[0]
    if n == 1 or not np.any(lap):
        return 0.0
    gram = lap.T @ lap
    v = np.linspace(1.0, 2.0, n)
    v /= np.linalg.norm(v)
    lam_prev = 0.0
    for k in range(max_iter):
        w = gram @ v
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            return 0.0
        lam = float(v @ w)
        v = w / norm_w
        if k >= 32 and abs(lam - lam_prev) <= rel_tol * max(abs(lam), 1e-300):
            return math.sqrt(max(lam, 0.0))
        lam_prev = lam
    return math.sqrt(max(lam_prev, 0.0))


def sigma_max_bound(
    graphs: list[WeightedDigraph] | tuple[WeightedDigraph, ...],
    rel_tol: float = 1e-10,
    max_iter: int = 100_000,
) -> float:
    """Upper bound on Laplacian spectral norms over the sequence.

    Returns ``max_t ||L_t||_2`` computed per graph by the power method on
    ``L^T L``, converged to relative tolerance ``rel_tol`` on the Rayleigh
    quotient.
    """
    if not graphs:
        raise ValueError("empty graph sequence")
    return max(_power_method_sigma_max(laplacian(g), rel_tol, max_iter) for g in graphs)


def consensus_stepsize_interval(
    delta: float, d_max: float, delta_tilde_prime: float
) -> tuple[float, float]:
    """Feasible consensus stepsize window for contraction of the disagreement.

    Given the nondegeneracy constant ``delta`` (smallest positive weight), the
    max out-degree ``d_max``, and a design parameter ``delta_tilde_prime`` in
    (0, 1), sets ``dt = min(delta_tilde_prime, (1 - delta_tilde_prime) *
    delta / d_max)`` and returns the window ``[dt / delta, (1 - dt) / d_max]``.
    Every sigma in the window keeps the consensus matrices ``I - sigma * L_t``
    nonnegative with diagonal at least ``dt`` and positive entries at least
    ``sigma * delta >= dt``.
    """
    if not (delta > 0.0 and math.isfinite(delta)):
        raise ValueError("delta must be positive and finite")
    if not (d_max > 0.0 and math.isfinite(d_max)):
        raise ValueError("d_max must be positive and finite")
    if delta > d_max:
        raise ValueError("delta cannot exceed d_max")
    if not 0.0 < delta_tilde_prime < 1.0:
        raise ValueError("delta_tilde_prime must lie strictly between 0 and 1")
    dt = min(delta_tilde_prime, (1.0 - delta_tilde_prime) * delta / d_max)
    lower = dt / delta
    upper = (1.0 - dt) / d_max
    if lower > upper:
        raise ValueError("infeasible stepsize window")
    return (lower, upper)


def complete_digraph(n: int, weight: float | None = None) -> WeightedDigraph:
    """Complete digraph on ``n`` nodes with uniform weight (default 1/(n-1))."""
    if n < 1:
        raise ValueError("need at least one node")
    if n == 1:
        return WeightedDigraph(np.zeros((1, 1)))
    w = 1.0 / (n - 1) if weight is None else float(weight)
    a = np.full((n, n), w)
    np.fill_diagonal(a, 0.0)
    return WeightedDigraph(a)


def watts_strogatz(
    n: int, k: int, p: float, seed: int, max_attempts: int = 100
) -> WeightedDigraph:
    """Connected small-world graph, symmetric, weights 1/(realized max degree).

    Standard construction: a ring lattice where each node links to its ``k``
    nearest neighbors, then each clockwise edge is rewired with probability
    ``p`` to a uniformly random non-neighbor. Regenerated (fresh draws from
    the same generator) until connected, at most ``max_attempts`` times.
    The uniform weighting makes the graph weight-balanced with weighted max
    out-degree at most 1.
    """
    if not (isinstance(n, int) and isinstance(k, int)):
        raise ValueError("n and k must be integers")
    if k < 2 or k % 2 != 0:
        raise ValueError("k must be an even integer >= 2")
    if n <= k:
        raise ValueError("need n > k")
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    for _ in range(max_attempts):
        adj = np.zeros((n, n), dtype=bool)
        for j in range(1, k // 2 + 1):
            for i in range(n):
                adj[i, (i + j) % n] = True
                adj[(i + j) % n, i] = True
        for j in range(1, k // 2 + 1):
            for i in range(n):
                if rng.random() < p:
                    old = (i + j) % n
                    candidates = np.nonzero(~adj[i])[0]
                    candidates = candidates[candidates != i]
                    if candidates.size == 0:
                        continue
                    new = int(rng.choice(candidates))
                    adj[i, old] = adj[old, i] = False
                    adj[i, new] = adj[new, i] = True
        sym = WeightedDigraph(adj.astype(float))
        if is_strongly_connected(sym):
            degree = int(adj.sum(axis=1).max())
            return WeightedDigraph(adj.astype(float) / degree)
    raise RuntimeError("failed to generate a connected graph within max_attempts")


@dataclass(frozen=True)
class DigraphSequence:
    """Periodic sequence of weighted digraphs with its consensus constants.

    ``window_b`` is the joint-connectivity window length: every union of
    ``window_b`` consecutive graphs is strongly connected (validated at
    construction). ``delta`` is the smallest positive weight, ``d_max`` the
    largest weighted out-degree, ``lambda_bar`` an upper bound on the
    Laplacian spectral norms; all three are computed by :func:`build`.
    """

    graphs: tuple[WeightedDigraph, ...]
    window_b: int
    delta: float
    d_max: float
    lambda_bar: float
    laplacians: tuple[np.ndarray, ...] = field(repr=False)

    @staticmethod
    def build(
        graphs: list[WeightedDigraph] | tuple[WeightedDigraph, ...],
        window_b: int,
        validate: bool = True,
    ) -> "DigraphSequence":
        graphs = tuple(graphs)
        if not graphs:
            raise ValueError("empty graph sequence")
        n = graphs[0].n
        if any(g.n != n for g in graphs):
            raise ValueError("graphs in a sequence must share the node count")
        if validate:
            if not all(is_weight_balanced(g) for g in graphs):
                raise ValueError("graphs must be weight-balanced")
            if not check_joint_connectivity(graphs, window_b):
                raise ValueError("sequence is not jointly connected over the window")
        laps = tuple(laplacian(g) for g in graphs)
        for lap in laps:
            lap.setflags(write=False)
        return DigraphSequence(
            graphs=graphs,
            window_b=window_b,
            delta=nondegeneracy_delta(graphs),
            d_max=max_out_degree(graphs),
            lambda_bar=sigma_max_bound(graphs),
            laplacians=laps,
        )

    @property
    def n(self) -> int:
        return self.graphs[0].n

    @property
    def period(self) -> int:
        return len(self.graphs)

    def graph_at(self, t: int) -> WeightedDigraph:
        """Graph active at step ``t >= 1`` (periodic, 1-indexed)."""
        if t < 1:
            raise ValueError("time indices start at 1")
        return self.graphs[(t - 1) % len(self.graphs)]

    def laplacian_at(self, t: int) -> np.ndarray:
        if t < 1:
            raise ValueError("time indices start at 1")
        return self.laplacians[(t - 1) % len(self.laplacians)]


def graph_to_json(graph: WeightedDigraph) -> dict:
    """JSON-serializable form ``{"n": n, "edges": [[i, j, weight], ...]}``."""
    return {"n": graph.n, "edges": [[i, j, w] for i, j, w in graph.edges]}


def graph_from_json(obj: dict) -> WeightedDigraph:
    n = obj["n"]
    a = np.zeros((n, n))
    for i, j, w in obj["edges"]:
        a[int(i), int(j)] = float(w)
    return WeightedDigraph(a)


def sequence_to_json(seq: DigraphSequence) -> dict:
    """JSON-serializable form ``{"B": window, "graphs": [...]}``."""
    return {"B": seq.window_b, "graphs": [graph_to_json(g) for g in seq.graphs]}


def sequence_from_json(obj: dict, validate: bool = True) -> DigraphSequence:
    graphs = [graph_from_json(g) for g in obj["graphs"]]
    return DigraphSequence.build(graphs, int(obj["B"]), validate=validate)


def load_sequence(path: str, validate: bool = True) -> DigraphSequence:
    """Read a sequence from a JSON file in the :func:`sequence_to_json` format."""
    with open(path, "r", encoding="utf-8") as fh:
        return sequence_from_json(json.load(fh), validate=validate)


def save_sequence(seq: DigraphSequence, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(sequence_to_json(seq), fh, indent=2)
        fh.write("\n")
