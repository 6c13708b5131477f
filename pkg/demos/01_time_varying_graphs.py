"""
Time-varying communication graphs
=================================

Builds the small-world graph family used by the benchmark, checks the
connectivity assumptions the convergence guarantees need, and derives the
admissible consensus stepsize window from the graph degrees.
"""

import numpy as np

from saddlenet.graph import (
    DigraphSequence,
    WeightedDigraph,
    check_joint_connectivity,
    consensus_stepsize_interval,
    is_weight_balanced,
    max_out_degree,
    nondegeneracy_delta,
    sigma_max_bound,
    watts_strogatz,
)

# a 20-agent small-world graph: ring lattice with degree 4, 5% rewiring
g = watts_strogatz(20, k=4, p=0.05, seed=1)
print("weight balanced:", is_weight_balanced(g))
print("max out-degree :", max_out_degree([g]))
print("min edge weight:", nondegeneracy_delta([g]))
print("sigma_max(L)   :", round(sigma_max_bound([g]), 4))

# the same ring split into two alternating matchings: neither half is
# connected on its own, but every window of two consecutive graphs is
n = 6
a_even, a_odd = np.zeros((n, n)), np.zeros((n, n))
for i in range(n):
    j = (i + 1) % n
    (a_even if i % 2 == 0 else a_odd)[i, j] = 0.5
    (a_even if i % 2 == 0 else a_odd)[j, i] = 0.5
halves = [WeightedDigraph(a_even), WeightedDigraph(a_odd)]
print("single matching strongly connected:", check_joint_connectivity(halves[:1], 1))
print("union of both matchings connected :", check_joint_connectivity(halves, 2))
seq = DigraphSequence.build(halves, window_b=2)
print("sequence window B =", seq.window_b, "graphs at t=1..4:",
      [int(np.count_nonzero(seq.graph_at(t).adjacency)) for t in (1, 2, 3, 4)], "edges")

# admissible consensus gains for these degrees: sigma must keep every
# self-loop weight positive after the Laplacian update
lower, upper = consensus_stepsize_interval(0.25, 4, 0.84)
print(f"admissible sigma window: ({lower:.4f}, {upper:.4f})")
