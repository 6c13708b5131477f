"""Scalar golden-section search and the projected subgradient fallback."""

from __future__ import annotations

import math

import numpy as np
import pytest

from saddlenet.projections import Box
from saddlenet.univariate import (
    golden_section_maximize,
    golden_section_minimize,
    projected_subgradient_minimize,
)


def test_golden_section_hand_case():
    # min over [0, 1] of w - 1.5 log(1 + w): stationary at w = 0.5
    x, val = golden_section_minimize(lambda w: w - 1.5 * math.log1p(w), 0.0, 1.0)
    # argument accuracy of a value-based stop is sqrt(eps); the value is exact
    assert abs(x - 0.5) <= 1e-7
    assert val == pytest.approx(0.5 - 1.5 * math.log(1.5), abs=1e-12)


def test_golden_section_boundary_minimum():
    x, val = golden_section_minimize(lambda w: w, 0.0, 2.0)
    assert abs(x - 0.0) <= 1e-9 and abs(val) <= 1e-9


def test_golden_section_maximize():
    x, val = golden_section_maximize(lambda w: -((w - 0.3) ** 2), -1.0, 1.0)
    assert abs(x - 0.3) <= 1e-7
    assert abs(val) <= 1e-14


def test_projected_subgradient_on_nonsmooth_objective():
    f = lambda x: abs(float(x[0]) - 0.3)
    sub = lambda x: np.array([1.0 if x[0] >= 0.3 else -1.0])
    x, val = projected_subgradient_minimize(f, sub, Box.cube(1, 0.0, 1.0), np.zeros(1))
    assert val <= 2e-2
    assert 0.0 <= x[0] <= 1.0
