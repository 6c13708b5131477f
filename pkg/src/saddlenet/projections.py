"""Euclidean projections onto the closed convex sets used by the dynamics.

Every descriptor is an immutable dataclass with a ``dim``, an exact
``project``, and a JSON round-trip. Projections satisfy the variational
inequality ``(P(x) - x) @ (P(x) - y) <= 0`` for every ``y`` in the set, which
is what the saddle-point analysis needs from them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ConvexSet",
    "FullSpace",
    "Box",
    "NonnegOrthant",
    "CenteredBall",
    "OrthantBall",
    "Product",
    "Replicated",
    "project",
    "residual",
    "contains",
    "set_to_json",
    "set_from_json",
]


def _as_vector(x, dim: int) -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.ndim != 1 or v.shape[0] != dim:
        raise ValueError(f"dimension mismatch: expected vector of length {dim}, got shape {v.shape}")
    return v


class ConvexSet:
    """Base class; subclasses implement ``project`` on 1-D arrays."""

    dim: int

    def project(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def project_many(self, xs: np.ndarray) -> np.ndarray:
        """Row-wise projection of an ``(m, dim)`` array (loop fallback)."""
        xs = np.asarray(xs, dtype=float)
        return np.stack([self.project(row) for row in xs])

    def residual(self, x) -> float:
        """Distance from ``x`` to the set, ``||P(x) - x||``."""
        v = _as_vector(x, self.dim)
        return float(np.linalg.norm(self.project(v) - v))

    def contains(self, x, tol: float = 1e-9) -> bool:
        return self.residual(x) <= tol

    def diameter(self) -> float:
        raise NotImplementedError


@dataclass(frozen=True)
class FullSpace(ConvexSet):
    """All of R^dim; projection is the identity."""

    dim: int

    def project(self, x: np.ndarray) -> np.ndarray:
        return _as_vector(x, self.dim)

    def project_many(self, xs: np.ndarray) -> np.ndarray:
        return np.asarray(xs, dtype=float)

    def diameter(self) -> float:
        return math.inf


def _frozen_array(obj, name: str, value) -> None:
    a = np.asarray(value, dtype=float)
    a.setflags(write=False)
    object.__setattr__(obj, name, a)


@dataclass(frozen=True)
class Box(ConvexSet):
    """Axis-aligned box ``{x : lower <= x <= upper}``; projection clips."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self) -> None:
        _frozen_array(self, "lower", self.lower)
        _frozen_array(self, "upper", self.upper)
        if self.lower.ndim != 1 or self.lower.shape != self.upper.shape:
            raise ValueError("lower and upper must be 1-D arrays of equal length")
        if np.any(self.lower > self.upper):
            raise ValueError("box must satisfy lower <= upper")

    @staticmethod
    def cube(dim: int, lower: float, upper: float) -> "Box":
        return Box(np.full(dim, float(lower)), np.full(dim, float(upper)))

    @property
    def dim(self) -> int:  # type: ignore[override]
        return self.lower.shape[0]

    def project(self, x: np.ndarray) -> np.ndarray:
        return np.clip(_as_vector(x, self.dim), self.lower, self.upper)

    def project_many(self, xs: np.ndarray) -> np.ndarray:
        return np.clip(np.asarray(xs, dtype=float), self.lower, self.upper)

    def diameter(self) -> float:
        return float(np.linalg.norm(self.upper - self.lower))

    def vertices(self) -> np.ndarray:
        """All corner points; only sensible for small dimension."""
        if self.dim > 16:
            raise ValueError("too many vertices to enumerate")
        corners = np.array(
            np.meshgrid(*[(lo, hi) for lo, hi in zip(self.lower, self.upper)], indexing="ij")
        )
        return corners.reshape(self.dim, -1).T if self.dim else np.zeros((1, 0))


@dataclass(frozen=True)
class NonnegOrthant(ConvexSet):
    """Nonnegative orthant; projection clips below at zero."""

    dim: int

    def project(self, x: np.ndarray) -> np.ndarray:
        return np.maximum(_as_vector(x, self.dim), 0.0)

    def project_many(self, xs: np.ndarray) -> np.ndarray:
        return np.maximum(np.asarray(xs, dtype=float), 0.0)

    def diameter(self) -> float:
        return math.inf


@dataclass(frozen=True)
class CenteredBall(ConvexSet):
    """Euclidean ball of radius ``r`` centered at the origin."""

    dim: int
    radius: float

    def __post_init__(self) -> None:
        if not (self.radius >= 0.0 and math.isfinite(self.radius)):
            raise ValueError("radius must be finite and nonnegative")

    def project(self, x: np.ndarray) -> np.ndarray:
        v = _as_vector(x, self.dim)
        nrm = float(np.linalg.norm(v))
        if nrm <= self.radius:
            return v.copy()
        return v * (self.radius / nrm)

    def project_many(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        norms = np.linalg.norm(xs, axis=1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(norms > self.radius, self.radius / norms, 1.0)
        return xs * np.nan_to_num(scale, nan=1.0)

    def diameter(self) -> float:
        return 2.0 * self.radius


@dataclass(frozen=True)
class OrthantBall(ConvexSet):
    """Intersection of the nonnegative orthant with the centered ball.

    Projection composes exactly: clip below at zero, then shrink onto the
    ball. The composition is the true projection because the orthant is a
    closed convex cone and the ball is centered at its apex, so the radial
    shrink keeps the point in the orthant and the orthant projection of any
    point already minimizes the distance within each ray.
    """

    dim: int
    radius: float

    def __post_init__(self) -> None:
        if not (self.radius >= 0.0 and math.isfinite(self.radius)):
            raise ValueError("radius must be finite and nonnegative")

    def project(self, x: np.ndarray) -> np.ndarray:
        y = np.maximum(_as_vector(x, self.dim), 0.0)
        nrm = float(np.linalg.norm(y))
        if nrm <= self.radius:
            return y
        return y * (self.radius / nrm)

    def project_many(self, xs: np.ndarray) -> np.ndarray:
        ys = np.maximum(np.asarray(xs, dtype=float), 0.0)
        norms = np.linalg.norm(ys, axis=1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(norms > self.radius, self.radius / norms, 1.0)
        return ys * np.nan_to_num(scale, nan=1.0)

    def diameter(self) -> float:
        # Two extreme points r*e_k, r*e_l realize the diameter when dim >= 2.
        return self.radius * math.sqrt(2.0) if self.dim >= 2 else self.radius


@dataclass(frozen=True)
class Product(ConvexSet):
    """Cartesian product of descriptors, projected blockwise."""

    parts: tuple[ConvexSet, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "parts", tuple(self.parts))

    @property
    def dim(self) -> int:  # type: ignore[override]
        return sum(p.dim for p in self.parts)

    def project(self, x: np.ndarray) -> np.ndarray:
        v = _as_vector(x, self.dim)
        out = np.empty_like(v)
        offset = 0
        for p in self.parts:
            out[offset : offset + p.dim] = p.project(v[offset : offset + p.dim])
            offset += p.dim
        return out

    def diameter(self) -> float:
        return math.sqrt(sum(p.diameter() ** 2 for p in self.parts))


@dataclass(frozen=True)
class Replicated(ConvexSet):
    """``count`` copies of the same base set, projected as one vectorized batch.

    Equivalent to ``Product((base,) * count)``; used on the per-agent blocks
    so a network-sized projection is one numpy call instead of a Python loop.
    """

    base: ConvexSet
    count: int

    def __post_init__(self) -> None:
        if self.count < 0:
            raise ValueError("count must be nonnegative")

    @property
    def dim(self) -> int:  # type: ignore[override]
        return self.base.dim * self.count

    def project(self, x: np.ndarray) -> np.ndarray:
        v = _as_vector(x, self.dim)
        if self.count == 0:
            return v.copy()
        return self.base.project_many(v.reshape(self.count, self.base.dim)).ravel()

    def diameter(self) -> float:
        return math.sqrt(self.count) * self.base.diameter()


def project(set_: ConvexSet, x) -> np.ndarray:
    """Euclidean projection of ``x`` onto the set."""
    return set_.project(_as_vector(x, set_.dim))


def residual(set_: ConvexSet, x) -> float:
    """Distance ``||P(x) - x||`` from ``x`` to the set (0 iff feasible)."""
    return set_.residual(x)


def contains(set_: ConvexSet, x, tol: float = 1e-9) -> bool:
    return set_.contains(x, tol)


def set_to_json(set_: ConvexSet) -> dict:
    """JSON-serializable descriptor, e.g. ``{"type": "orthant_ball", "r": 3.3}``."""
    if isinstance(set_, FullSpace):
        return {"type": "full_space", "dim": set_.dim}
    if isinstance(set_, Box):
        return {"type": "box", "lower": set_.lower.tolist(), "upper": set_.upper.tolist()}
    if isinstance(set_, NonnegOrthant):
        return {"type": "nonneg_orthant", "dim": set_.dim}
    if isinstance(set_, CenteredBall):
        return {"type": "centered_ball", "dim": set_.dim, "r": set_.radius}
    if isinstance(set_, OrthantBall):
        return {"type": "orthant_ball", "dim": set_.dim, "r": set_.radius}
    if isinstance(set_, Product):
        return {"type": "product", "parts": [set_to_json(p) for p in set_.parts]}
    if isinstance(set_, Replicated):
        return {"type": "replicated", "base": set_to_json(set_.base), "count": set_.count}
    raise ValueError(f"unknown set descriptor {type(set_).__name__}")


def set_from_json(obj: dict) -> ConvexSet:
    kind = obj["type"]
    if kind == "full_space":
        return FullSpace(int(obj["dim"]))
    if kind == "box":
        return Box(np.asarray(obj["lower"], dtype=float), np.asarray(obj["upper"], dtype=float))
    if kind == "nonneg_orthant":
        return NonnegOrthant(int(obj["dim"]))
    if kind == "centered_ball":
        return CenteredBall(int(obj["dim"]), float(obj["r"]))
    if kind == "orthant_ball":
        return OrthantBall(int(obj["dim"]), float(obj["r"]))
    if kind == "product":
        return Product(tuple(set_from_json(p) for p in obj["parts"]))
    if kind == "replicated":
        return Replicated(set_from_json(obj["base"]), int(obj["count"]))
    raise ValueError(f"unknown set descriptor type {kind!r}")
