"""
Consensus-based saddle-point subgradient iteration
==================================================

Drives the per-agent update directly: each agent owns one decision
coordinate and one multiplier copy, exchanges the copies over the network,
and the running averages approach the centralized optimum.
"""

import numpy as np

from saddlenet.benchmark import oracle_solve, random_instance, to_separable
from saddlenet.constrained import build_lagrangian_saddle, cspsg_step
from saddlenet.dynamics import DoublingTrick, initial_state, rate, update_running_average
from saddlenet.graph import complete_digraph

n = 3
inst = random_instance(n, seed=10)
sol = oracle_solve(inst)
sep = to_separable(inst)
radius = 2.0 * sol.z_star + 1.0  # any radius covering z* works
prob = build_lagrangian_saddle(sep, radius)
g = complete_digraph(n)

state = initial_state(prob)
avg_w = state.w.copy()
schedule = DoublingTrick()
for t in range(1, 20001):
    state = cspsg_step(sep, state, g, sigma=0.25, eta=rate(schedule, t), radius=radius)
    avg_w = update_running_average(avg_w, state.w, t)

cost = float(inst.c @ avg_w)
print("agents:", n)
print("running-average allocation:", np.round(avg_w, 4))
print("oracle allocation         :", np.round(sol.w_star, 4))
print(f"cost {cost:.6f} vs oracle {sol.value:.6f} "
      f"(relative error {abs(cost - sol.value) / sol.value:.2e})")
print("multiplier copies at final step:", np.round(state.z, 4),
      f"(z* = {sol.z_star:.4f})")
