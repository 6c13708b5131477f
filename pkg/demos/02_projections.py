"""
Projection operators
====================

Shows the closed-form projections the dynamics rely on, including the
truncated orthant (nonnegative vectors inside a norm ball) that keeps
multiplier iterates bounded, and spot-checks the defining variational
inequality at a few feasible points.
"""

import numpy as np

from saddlenet.projections import Box, CenteredBall, NonnegOrthant, OrthantBall, Replicated

rng = np.random.default_rng(0)

box = Box.cube(3, 0.0, 1.0)
print("box projection of [2, -1, 0.4]  :", box.project(np.array([2.0, -1.0, 0.4])))

ball = CenteredBall(2, 2.0)
print("ball projection of [3, 4]       :", ball.project(np.array([3.0, 4.0])))

orthant = NonnegOrthant(3)
print("orthant projection of [-1, 2, 0]:", orthant.project(np.array([-1.0, 2.0, 0.0])))

# the multiplier set: clip negatives first, then rescale into the ball
trunc = OrthantBall(2, 1.0)
p = np.array([-0.5, 3.0])
x_hat = trunc.project(p)
print("truncated orthant projection    :", x_hat, "norm", round(float(np.linalg.norm(x_hat)), 6))

# variational inequality: the residual (p - x_hat) makes an obtuse angle
# with every feasible direction, which characterizes the projection
for _ in range(4):
    y = rng.random(2)
    y *= min(1.0, 0.9 / np.linalg.norm(y))
    print("  (p - x_hat) @ (y - x_hat) =", f"{float((p - x_hat) @ (y - x_hat)):+.3e}", "<= 0")

# network variables are per-agent copies; Replicated applies one local
# set to every block at once
rep = Replicated(Box.cube(2, 0.0, 1.0), 3)
stacked = rng.normal(size=6) * 2
print("replicated projection blocks    :", rep.project(stacked).reshape(3, 2))
