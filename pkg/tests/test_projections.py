"""Projection operators against brute-force minimization and each other."""

from __future__ import annotations

import numpy as np
import pytest

from saddlenet.projections import (
    Box,
    CenteredBall,
    FullSpace,
    NonnegOrthant,
    OrthantBall,
    Product,
    Replicated,
    set_from_json,
    set_to_json,
)

scipy_opt = pytest.importorskip("scipy.optimize")


def brute_project(point, dim, feasible_constraints, starts):
    """Nearest feasible point by multi-start SLSQP, independent of our formulas.

    SLSQP can report status 8 at an active boundary even when converged, so we
    keep the best feasible iterate across starts instead of trusting the flag.
    The objective is 1-strongly convex in the squared norm, which makes any
    near-optimal feasible point argument-close to the unique projection.
    """
    best, best_val = None, np.inf
    for x0 in starts:
        res = scipy_opt.minimize(
            lambda x: ((x - point) ** 2).sum(),
            x0,
            jac=lambda x: 2 * (x - point),
            constraints=feasible_constraints,
            method="SLSQP",
            options={"maxiter": 300, "ftol": 1e-15},
        )
        feasible = all(np.all(c["fun"](res.x) >= -1e-10) for c in feasible_constraints)
        val = ((res.x - point) ** 2).sum()
        if feasible and val < best_val:
            best, best_val = res.x, val
    assert best is not None
    return best


def orthant_ball_constraints(radius):
    return [
        {"type": "ineq", "fun": lambda x: x},
        {"type": "ineq", "fun": lambda x, r=radius: r**2 - (x**2).sum()},
    ]


def test_orthant_ball_matches_brute_force():
    rng = np.random.default_rng(0)
    for dim in (1, 2, 3):
        s = OrthantBall(dim, 1.5)
        for _ in range(60):
            p = rng.normal(scale=2.5, size=dim)
            ours = s.project(p)
            starts = [np.full(dim, 0.1), np.full(dim, 1.5 / np.sqrt(dim) * 0.9), np.zeros(dim)]
            ref = brute_project(p, dim, orthant_ball_constraints(1.5), starts)
            assert np.linalg.norm(ours - ref) <= 1e-6
            assert s.contains(ours)


def test_box_and_ball_projections():
    box = Box(np.array([-1.0, 0.0]), np.array([1.0, 2.0]))
    assert np.array_equal(box.project(np.array([3.0, -4.0])), np.array([1.0, 0.0]))
    ball = CenteredBall(2, 2.0)
    assert np.allclose(ball.project(np.array([3.0, 4.0])), np.array([1.2, 1.6]))
    assert np.array_equal(ball.project(np.zeros(2)), np.zeros(2))
    orth = NonnegOrthant(3)
    assert np.array_equal(orth.project(np.array([-1.0, 0.5, -0.2])), np.array([0.0, 0.5, 0.0]))
    assert np.array_equal(FullSpace(2).project(np.array([5.0, -5.0])), np.array([5.0, -5.0]))


def test_projection_is_idempotent_and_feasible():
    rng = np.random.default_rng(1)
    sets = [
        Box.cube(3, 0.0, 1.0),
        CenteredBall(3, 0.7),
        OrthantBall(3, 1.1),
        NonnegOrthant(3),
    ]
    for s in sets:
        for _ in range(50):
            p = rng.normal(scale=3.0, size=3)
            x = s.project(p)
            assert s.contains(x)
            assert np.allclose(s.project(x), x, atol=1e-12)


def test_variational_inequality():
    # (p - proj(p)) . (y - proj(p)) <= 0 for every feasible y
    rng = np.random.default_rng(2)
    s = OrthantBall(3, 1.0)
    for _ in range(40):
        p = rng.normal(scale=2.0, size=3)
        x = s.project(p)
        for _ in range(25):
            y = s.project(rng.normal(scale=1.0, size=3))  # feasible sample
            assert (p - x) @ (y - x) <= 1e-9


def test_product_and_replicated_agree_with_blocks():
    rng = np.random.default_rng(3)
    base = OrthantBall(2, 0.8)
    rep = Replicated(base, 3)
    prod = Product((base, base, base))
    for _ in range(30):
        p = rng.normal(scale=2.0, size=6)
        blocks = np.concatenate([base.project(p[i : i + 2]) for i in range(0, 6, 2)])
        assert np.allclose(rep.project(p), blocks, atol=1e-14)
        assert np.allclose(prod.project(p), blocks, atol=1e-14)
    assert rep.dim == 6 and prod.dim == 6


def test_diameters():
    assert Box.cube(4, 0.0, 1.0).diameter() == pytest.approx(2.0)
    assert CenteredBall(3, 1.5).diameter() == 3.0
    assert OrthantBall(1, 2.0).diameter() == 2.0
    # two orthant points at distance r sqrt(2): r e_1 and r e_2
    assert OrthantBall(2, 2.0).diameter() == pytest.approx(2.0 * np.sqrt(2.0))
    assert np.isinf(NonnegOrthant(2).diameter())


def test_dimension_mismatch_rejected():
    with pytest.raises(ValueError, match="dimension"):
        Box.cube(2, 0.0, 1.0).project(np.zeros(3))


def test_set_json_round_trip():
    sets = [
        FullSpace(4),
        Box(np.array([0.0, -1.0]), np.array([2.0, 1.0])),
        NonnegOrthant(3),
        CenteredBall(2, 1.25),
        OrthantBall(2, 0.5),
        Replicated(OrthantBall(1, 2.0), 5),
        Product((Box.cube(2, 0.0, 1.0), CenteredBall(1, 3.0))),
    ]
    rng = np.random.default_rng(4)
    for s in sets:
        back = set_from_json(set_to_json(s))
        assert back.dim == s.dim
        p = rng.normal(size=s.dim)
        assert np.array_equal(back.project(p), s.project(p))
