"""Domain descriptions, exact distance to the boundary and convexity tests.

Three kinds of bounded domain are supported: the open interval ``]0, L[``,
simple counterclockwise polygons and planar annuli centred at the origin.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from .errors import (
    DomainError,
    NonPositiveMeasureError,
    OutsideDomainError,
    SelfIntersectingError,
)

CONVEXITY_TOL = 1e-12


@dataclass(frozen=True)
class Interval:
    length: float


@dataclass(frozen=True)
class Polygon:
    vertices: tuple

    def __post_init__(self):
        object.__setattr__(
            self, "vertices", tuple((float(x), float(y)) for x, y in self.vertices)
        )


@dataclass(frozen=True)
class Annulus:
    inner: float
    outer: float


DomainSpec = Union[Interval, Polygon, Annulus]


def spec_from_dict(data: dict) -> DomainSpec:
    kind = data.get("type")
    if kind == "interval":
        return Interval(float(data["length"]))
    if kind == "polygon":
        return Polygon(tuple(tuple(v) for v in data["vertices"]))
    if kind == "annulus":
        return Annulus(float(data["inner"]), float(data["outer"]))
    raise DomainError(f"unknown domain type {kind!r}")


def spec_to_dict(spec: DomainSpec) -> dict:
    if isinstance(spec, Interval):
        return {"type": "interval", "length": spec.length}
    if isinstance(spec, Polygon):
        return {"type": "polygon", "vertices": [list(v) for v in spec.vertices]}
    return {"type": "annulus", "inner": spec.inner, "outer": spec.outer}


def load_spec(path) -> DomainSpec:
    return spec_from_dict(json.loads(Path(path).read_text()))


def _segments_cross(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return 0 if abs(v) < 1e-15 else (1 if v > 0 else -1)

    def on_segment(a, b, c):
        return (min(a[0], b[0]) - 1e-15 <= c[0] <= max(a[0], b[0]) + 1e-15
                and min(a[1], b[1]) - 1e-15 <= c[1] <= max(a[1], b[1]) + 1e-15)

    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    if o1 != o2 and o3 != o4:
        return True
    if o1 == 0 and on_segment(p1, p2, q1):
        return True
    if o2 == 0 and on_segment(p1, p2, q2):
        return True
    if o3 == 0 and on_segment(q1, q2, p1):
        return True
    if o4 == 0 and on_segment(q1, q2, p2):
        return True
    return False


def segment_distance(points: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distances from ``points`` (n, 2) to every segment ``[a_k, b_k]``; shape (n, k)."""
    ab = b - a
    ap = points[:, None, :] - a[None, :, :]
    t = np.einsum("nkd,kd->nk", ap, ab) / np.einsum("kd,kd->k", ab, ab)
    t = np.clip(t, 0.0, 1.0)
    nearest = a[None] + t[..., None] * ab[None]
    return np.linalg.norm(points[:, None, :] - nearest, axis=-1)


@dataclass(eq=False)
class Domain:
    """A validated domain with cached geometric data."""

    spec: DomainSpec
    diameter: float
    measure: float
    dim: int
    edges: np.ndarray = field(default=None, repr=False)  # (k, 2, 2) for polygons
    smoothness: str = "lipschitz"

    @property
    def kind(self) -> str:
        return type(self.spec).__name__.lower()

    @property
    def convex(self) -> bool:
        return is_convex(self)

    def distance(self, x, check: bool = True) -> np.ndarray:
        """Vectorised distance to the boundary."""
        spec = self.spec
        tol = 1e-12 * self.diameter
        if isinstance(spec, Interval):
            x = np.asarray(x, dtype=float)
            if x.ndim == 2:
                x = x[:, 0]
            d = np.minimum(x, spec.length - x)
        elif isinstance(spec, Annulus):
            pts = np.atleast_2d(np.asarray(x, dtype=float))
            r = np.hypot(pts[:, 0], pts[:, 1])
            d = np.minimum(r - spec.inner, spec.outer - r)
        else:
            pts = np.atleast_2d(np.asarray(x, dtype=float))
            d = segment_distance(pts, self.edges[:, 0], self.edges[:, 1]).min(axis=1)
            if check:
                inside = self.contains(pts)
                d = np.where(inside, d, -d)
        if check and np.any(d < -tol):
            raise OutsideDomainError("point outside the closure of the domain")
        return np.maximum(d, 0.0)

    def contains(self, pts: np.ndarray) -> np.ndarray:
        """Closed-domain membership test (boundary counts as inside)."""
        spec = self.spec
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if isinstance(spec, Interval):
            return (pts[:, 0] >= 0) & (pts[:, 0] <= spec.length)
        if isinstance(spec, Annulus):
            r = np.hypot(pts[:, 0], pts[:, 1])
            return (r >= spec.inner) & (r <= spec.outer)
        a, b = self.edges[:, 0], self.edges[:, 1]
        x, y = pts[:, 0:1], pts[:, 1:2]
        crosses = ((a[:, 1] > y) != (b[:, 1] > y))
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = a[:, 0] + (y - a[:, 1]) * (b[:, 0] - a[:, 0]) / (b[:, 1] - a[:, 1])
        inside = (np.sum(crosses & (x < xint), axis=1) % 2) == 1
        on_edge = segment_distance(pts, a, b).min(axis=1) <= 1e-12 * self.diameter
        return inside | on_edge


def build_domain(spec: DomainSpec) -> Domain:
    if isinstance(spec, Interval):
        if not spec.length > 0:
            raise NonPositiveMeasureError("interval length must be positive")
        return Domain(spec, spec.length, spec.length, 1, smoothness="smooth")
    if isinstance(spec, Annulus):
        if not (0 < spec.inner < spec.outer):
            raise DomainError("annulus needs 0 < inner < outer")
        area = math.pi * (spec.outer**2 - spec.inner**2)
        return Domain(spec, 2 * spec.outer, area, 2, smoothness="smooth")
    if isinstance(spec, Polygon):
        v = np.asarray(spec.vertices, dtype=float)
        if v.ndim != 2 or v.shape[0] < 3 or v.shape[1] != 2:
            raise DomainError("polygon needs at least 3 planar vertices")
        w = np.roll(v, -1, axis=0)
        area = 0.5 * float(np.sum(v[:, 0] * w[:, 1] - w[:, 0] * v[:, 1]))
        n = len(v)
        for i in range(n):
            for j in range(i + 1, n):
                if j == i + 1 or (i == 0 and j == n - 1):
                    continue
                if _segments_cross(v[i], w[i], v[j], w[j]):
                    raise SelfIntersectingError(f"edges {i} and {j} intersect")
        for i in range(n):
            if np.allclose(v[i], w[i]):
                raise SelfIntersectingError(f"repeated vertex {i}")
        if not area > 0:
            raise NonPositiveMeasureError(
                "polygon must have positive area with counterclockwise orientation"
            )
        diff = v[:, None, :] - v[None, :, :]
        diameter = float(np.sqrt((diff**2).sum(-1)).max())
        edges = np.stack([v, w], axis=1)
        return Domain(spec, diameter, area, 2, edges=edges, smoothness="lipschitz")
    raise DomainError(f"unsupported domain spec {spec!r}")


def distance_to_boundary(domain: Domain, x) -> float | np.ndarray:
    """Distance from ``x`` to the boundary; a float for a single point."""
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == (0 if domain.dim == 1 else 1)
    d = domain.distance(arr)
    return float(np.ravel(d)[0]) if single else d


def is_convex(domain: Domain) -> bool:
    spec = domain.spec
    if isinstance(spec, Interval):
        return True
    if isinstance(spec, Annulus):
        return False
    v = np.asarray(spec.vertices)
    e = np.roll(v, -1, axis=0) - v
    en = np.roll(e, -1, axis=0)
    cross = e[:, 0] * en[:, 1] - e[:, 1] * en[:, 0]
    return bool(np.all(cross >= -CONVEXITY_TOL))


def axis_aligned_box(domain: Domain):
    """Return ``(x0, y0, x1, y1)`` when the polygon is an axis-aligned rectangle."""
    if not isinstance(domain.spec, Polygon) or len(domain.spec.vertices) != 4:
        return None
    v = np.asarray(domain.spec.vertices)
    xs, ys = np.unique(v[:, 0]), np.unique(v[:, 1])
    if len(xs) != 2 or len(ys) != 2:
        return None
    corners = {(x, y) for x in xs for y in ys}
    if {tuple(p) for p in v} != corners:
        return None
    return float(xs[0]), float(ys[0]), float(xs[1]), float(ys[1])


def unit_square() -> Polygon:
    return Polygon(((0, 0), (1, 0), (1, 1), (0, 1)))


def l_shape() -> Polygon:
    return Polygon(((0, 0), (2, 0), (2, 1), (1, 1), (1, 2), (0, 2)))


def regular_polygon(n: int, radius: float = 1.0) -> Polygon:
    t = 2 * np.pi * np.arange(n) / n
    return Polygon(tuple(zip(radius * np.cos(t), radius * np.sin(t))))
