"""
Projected saddle-point dynamics with Laplacian averaging
========================================================

Runs the generic subgradient dynamics on a two-agent Lagrangian saddle
problem and prints how the running averages, the saddle-evaluation gap,
and the network disagreement evolve under the doubling stepsize schedule.
"""

import math

import numpy as np

from saddlenet.benchmark import BenchmarkInstance, lagrangian_saddle, oracle_solve
from saddlenet.dynamics import DoublingTrick, rate, run
from saddlenet.graph import DigraphSequence, complete_digraph

# the schedule: constant within epochs of doubling length, 1/sqrt(len) each
print("doubling-trick rates:", [round(rate(DoublingTrick(), t), 4) for t in range(1, 10)])

# an asymmetric two-agent instance: the agents' multiplier copies receive
# different constraint feedback, so the disagreement column is nonzero
inst = BenchmarkInstance(c=np.array([1.0, 0.6]), d=np.array([0.8, 1.2]), b=math.log(1.5))
sol = oracle_solve(inst)
print(f"oracle: cost {sol.value:.6f}, multiplier z* = {sol.z_star:.6f}")

prob = lagrangian_saddle(inst, radius=3.0)
seq = DigraphSequence.build([complete_digraph(2)], window_b=1)
trace = run(
    prob, seq, sigma=0.25, schedule=DoublingTrick(), n_steps=4000, stride=1,
    phi_star=sol.value,
)

ts = trace.column("t")
print(f"{'t':>6} {'eta':>8} {'saddle gap':>12} {'z disagreement':>15}")
for t_show in (1, 10, 100, 1000, 4000):
    i = int(np.searchsorted(ts, t_show))
    print(
        f"{int(ts[i]):>6} {trace.column('eta')[i]:>8.4f}"
        f" {trace.column('saddle_gap')[i]:>12.2e}"
        f" {trace.column('disagreement_z')[i]:>15.2e}"
    )
print("columns recorded:", ", ".join(trace.columns))
