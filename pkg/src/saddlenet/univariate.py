"""Scalar minimization helpers shared by the solvers.

Golden-section search for unimodal (in particular convex) scalar functions,
plus a small projected-subgradient fallback for convex functions on a
descriptor set when no scalar structure is available.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .projections import ConvexSet

__all__ = ["golden_section_minimize", "golden_section_maximize", "projected_subgradient_minimize"]

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0  # 1/phi
_INV_PHI2 = (3.0 - math.sqrt(5.0)) / 2.0  # 1/phi^2


def golden_section_minimize(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    iterations: int = 200,
) -> tuple[float, float]:
    """Minimize a unimodal scalar function on ``[lo, hi]``.

    Returns ``(x, f(x))`` at the midpoint of the final bracket. With the
    default 200 iterations the bracket width shrinks below float resolution
    for any sane interval; the loop exits early once the bracket is tighter
    than machine precision around its midpoint.
    """
    if not lo <= hi:
        raise ValueError("need lo <= hi")
    a, b = float(lo), float(hi)
    h = b - a
    if h == 0.0:
        return a, f(a)
    c = a + _INV_PHI2 * h
    d = a + _INV_PHI * h
    fc, fd = f(c), f(d)
    for _ in range(iterations):
        if fc < fd:
            b, d, fd = d, c, fc
            h = b - a
            c = a + _INV_PHI2 * h
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            h = b - a
            d = a + _INV_PHI * h
            fd = f(d)
        if h <= 1e-15 * max(1.0, abs(a) + abs(b)):
            break
    x = 0.5 * (a + b)
    return x, f(x)


def golden_section_maximize(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    iterations: int = 200,
) -> tuple[float, float]:
    """Maximize a unimodal scalar function on ``[lo, hi]``; returns ``(x, f(x))``."""
    x, neg = golden_section_minimize(lambda t: -f(t), lo, hi, iterations)
    return x, -neg


def projected_subgradient_minimize(
    f: Callable[[np.ndarray], float],
    subgrad: Callable[[np.ndarray], np.ndarray],
    set_: ConvexSet,
    x0: np.ndarray,
    iterations: int = 20_000,
    scale: float | None = None,
) -> tuple[np.ndarray, float]:
    """Minimize a convex function over a descriptor set; returns the best iterate.

    Classic projected subgradient with stepsize ``scale / sqrt(k)``; ``scale``
    defaults to the set diameter when finite, else 1. Accuracy is of order
    ``scale * G / sqrt(iterations)`` for subgradient bound ``G``; with the
    default iteration count that is a ~1e-2 * scale * G guarantee, while in
    practice the best iterate on the piecewise-smooth functions used here is
    far better. Callers needing certified accuracy use the scalar routines.
    """
    x = set_.project(np.asarray(x0, dtype=float))
    best_x, best_f = x.copy(), f(x)
    if scale is None:
        diam = set_.diameter()
        scale = diam if math.isfinite(diam) and diam > 0.0 else 1.0
    for k in range(1, iterations + 1):
        g = np.asarray(subgrad(x), dtype=float)
        norm_g = float(np.linalg.norm(g))
        if norm_g == 0.0:
            return x, f(x)
        x = set_.project(x - (scale / math.sqrt(k)) * g / norm_g)
        fx = f(x)
        if fx < best_f:
            best_x, best_f = x.copy(), fx
    return best_x, best_f
