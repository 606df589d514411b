"""Exact geometry for line-of-sight links and the cylindrical blocker model.

A standing person is modelled as a vertical solid cylinder resting on the
floor.  For a fixed link the set of floor positions of the cylinder axis that
break the link is a stadium shape (a segment inflated by the cylinder
radius), obtained by clipping the link to the height band the cylinder can
reach and projecting the surviving piece onto the floor.

The membership test of :class:`StadiumRegion` and the direct predicate
:func:`segment_intersects_cylinder` share one arithmetic path, so they agree
bit-for-bit on every input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from owcrelay.quadrature import integrate_region

__all__ = [
    "Point3",
    "Segment3",
    "CylinderSpec",
    "Rect",
    "StadiumRegion",
    "segment_intersects_cylinder",
    "segments_blocked",
    "blocked_region",
    "region_area",
]


@dataclass(frozen=True)
class Point3:
    """A point in the corner-origin room frame, coordinates in meters."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        for name in ("x", "y", "z"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"non-finite coordinate {name}={v!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    def xy(self) -> tuple[float, float]:
        return (self.x, self.y)

    def distance_to(self, other: "Point3") -> float:
        return math.dist((self.x, self.y, self.z), (other.x, other.y, other.z))


@dataclass(frozen=True)
class Segment3:
    """A closed straight segment with distinct endpoints."""

    a: Point3
    b: Point3

    def __post_init__(self):
        if (self.a.x, self.a.y, self.a.z) == (self.b.x, self.b.y, self.b.z):
            raise ValueError("degenerate segment: endpoints coincide")

    def length(self) -> float:
        return self.a.distance_to(self.b)


@dataclass(frozen=True)
class CylinderSpec:
    """Solid vertical cylinder standing on the floor (axis footprint point,
    occupied heights 0..height)."""

    height: float = 1.8
    radius: float = 0.3

    def __post_init__(self):
        if not (self.height > 0 and math.isfinite(self.height)):
            raise ValueError(f"cylinder height must be positive, got {self.height}")
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise ValueError(f"cylinder radius must be positive, got {self.radius}")


@dataclass(frozen=True)
class Rect:
    """Closed axis-aligned rectangle on the floor plane."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if not (self.x0 <= self.x1 and self.y0 <= self.y1):
            raise ValueError(f"empty rectangle bounds {self!r}")

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def area(self) -> float:
        return self.width * self.height

    def contains(self, points) -> np.ndarray | bool:
        p = np.asarray(points, dtype=float)
        scalar = p.ndim == 1
        p = np.atleast_2d(p)
        ok = (
            (p[:, 0] >= self.x0)
            & (p[:, 0] <= self.x1)
            & (p[:, 1] >= self.y0)
            & (p[:, 1] <= self.y1)
        )
        return bool(ok[0]) if scalar else ok

    def intersect(self, other: "Rect") -> "Rect | None":
        x0 = max(self.x0, other.x0)
        y0 = max(self.y0, other.y0)
        x1 = min(self.x1, other.x1)
        y1 = min(self.y1, other.y1)
        if x0 > x1 or y0 > y1:
            return None
        return Rect(x0, y0, x1, y1)


def _z_band(az: float, bz: float, height: float):
    """Parameter interval of a segment with its z inside [0, height].

    Returns (t_lo, t_hi) within [0, 1], or None when the segment never
    enters the band.
    """
    dz = bz - az
    if dz == 0.0:
        return (0.0, 1.0) if 0.0 <= az <= height else None
    t0 = (0.0 - az) / dz
    t1 = (height - az) / dz
    lo, hi = (t0, t1) if t0 <= t1 else (t1, t0)
    lo = max(lo, 0.0)
    hi = min(hi, 1.0)
    return (lo, hi) if lo <= hi else None


def _clipped_spine(a: Point3, b: Point3, height: float):
    """Floor projection of the sub-segment reachable by the cylinder.

    Returns two xy endpoints (possibly coincident), or None when the whole
    segment lies above the cylinder height.
    """
    band = _z_band(a.z, b.z, height)
    if band is None:
        return None
    lo, hi = band
    dx = b.x - a.x
    dy = b.y - a.y
    p0 = (a.x + lo * dx, a.y + lo * dy)
    p1 = (a.x + hi * dx, a.y + hi * dy)
    return p0, p1


def point_segment_distance_sq(points, p0, p1) -> np.ndarray:
    """Squared distance from 2-D points (N, 2) to the closed segment p0-p1."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    w = p1 - p0
    ww = float(w @ w)
    d = pts - p0
    if ww == 0.0:
        return d[:, 0] ** 2 + d[:, 1] ** 2
    t = np.clip((d @ w) / ww, 0.0, 1.0)
    diff = d - t[:, None] * w
    return diff[:, 0] ** 2 + diff[:, 1] ** 2


def segment_intersects_cylinder(link: Segment3, center, cyl: CylinderSpec) -> bool:
    """True iff the closed segment meets the closed solid cylinder whose
    axis footprint is at ``center`` (floor xy)."""
    spine = _clipped_spine(link.a, link.b, cyl.height)
    if spine is None:
        return False
    d2 = point_segment_distance_sq(np.asarray(center, dtype=float), spine[0], spine[1])
    return bool(d2[0] <= cyl.radius * cyl.radius)


def segments_blocked(a_pts, b_pts, center, cyl: CylinderSpec) -> np.ndarray:
    """Vectorised form of :func:`segment_intersects_cylinder`.

    ``a_pts`` and ``b_pts`` broadcast to (N, 3); returns a boolean (N,).
    """
    a = np.atleast_2d(np.asarray(a_pts, dtype=float))
    b = np.atleast_2d(np.asarray(b_pts, dtype=float))
    a, b = np.broadcast_arrays(a, b)
    c = np.asarray(center, dtype=float)
    n = a.shape[0]
    out = np.zeros(n, dtype=bool)

    az = a[:, 2]
    dz = b[:, 2] - az
    h = cyl.height
    r2 = cyl.radius * cyl.radius

    flat = dz == 0.0
    lo = np.zeros(n)
    hi = np.ones(n)
    valid = np.ones(n, dtype=bool)
    if np.any(flat):
        inside = (az >= 0.0) & (az <= h)
        valid[flat] = inside[flat]
    steep = ~flat
    if np.any(steep):
        with np.errstate(divide="ignore", invalid="ignore"):
            t0 = (0.0 - az[steep]) / dz[steep]
            t1 = (h - az[steep]) / dz[steep]
        lo_s = np.minimum(t0, t1)
        hi_s = np.maximum(t0, t1)
        lo_s = np.maximum(lo_s, 0.0)
        hi_s = np.minimum(hi_s, 1.0)
        lo[steep] = lo_s
        hi[steep] = hi_s
        valid[steep] &= lo_s <= hi_s
    if not np.any(valid):
        return out

    dxy = b[:, :2] - a[:, :2]
    p0 = a[:, :2] + lo[:, None] * dxy
    p1 = a[:, :2] + hi[:, None] * dxy
    w = p1 - p0
    ww = w[:, 0] ** 2 + w[:, 1] ** 2
    d = c[None, :] - p0
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (d[:, 0] * w[:, 0] + d[:, 1] * w[:, 1]) / ww
    t = np.where(ww > 0.0, np.clip(t, 0.0, 1.0), 0.0)
    diff = d - t[:, None] * w
    d2 = diff[:, 0] ** 2 + diff[:, 1] ** 2
    out[valid] = d2[valid] <= r2
    return out


class StadiumRegion:
    """Floor positions of the cylinder axis that block a given link.

    Membership is ``distance(point, spine) <= radius`` and point inside the
    clip rectangle.  An empty region (link entirely above the cylinder)
    contains nothing.
    """

    def __init__(self, spine_p0, spine_p1, radius: float, clip: Rect, empty: bool = False):
        if radius < 0:
            raise ValueError(f"region radius must be >= 0, got {radius}")
        self.empty = bool(empty)
        self.radius = float(radius)
        self.clip = clip
        if self.empty:
            self.p0 = None
            self.p1 = None
        else:
            self.p0 = np.asarray(spine_p0, dtype=float)
            self.p1 = np.asarray(spine_p1, dtype=float)

    @classmethod
    def empty_region(cls, clip: Rect) -> "StadiumRegion":
        return cls(None, None, 0.0, clip, empty=True)

    @property
    def is_empty(self) -> bool:
        return self.empty

    def spine_length(self) -> float:
        if self.empty:
            return 0.0
        return float(np.hypot(*(self.p1 - self.p0)))

    def contains(self, points) -> np.ndarray | bool:
        pts = np.asarray(points, dtype=float)
        scalar = pts.ndim == 1
        pts = np.atleast_2d(pts)
        if self.empty:
            out = np.zeros(pts.shape[0], dtype=bool)
            return bool(out[0]) if scalar else out
        d2 = point_segment_distance_sq(pts, self.p0, self.p1)
        out = (d2 <= self.radius * self.radius) & self.clip.contains(pts)
        return bool(out[0]) if scalar else out

    def signed_distance(self, points):
        """Distance to the stadium boundary, negative inside, with the unit
        outward gradient.  The clip rectangle is not part of this distance
        field; quadrature restricts its domain to ``bbox()`` instead."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.empty:
            sd = np.full(pts.shape[0], np.inf)
            grad = np.zeros((pts.shape[0], 2))
            grad[:, 0] = 1.0
            return sd, grad
        w = self.p1 - self.p0
        ww = float(w @ w)
        d = pts - self.p0
        if ww == 0.0:
            t = np.zeros(pts.shape[0])
        else:
            t = np.clip((d @ w) / ww, 0.0, 1.0)
        diff = d - t[:, None] * w
        dist = np.hypot(diff[:, 0], diff[:, 1])
        grad = np.zeros_like(diff)
        pos = dist > 0.0
        grad[pos] = diff[pos] / dist[pos, None]
        grad[~pos, 0] = 1.0
        return dist - self.radius, grad

    def bbox(self) -> Rect | None:
        """Bounding box of the region intersected with the clip rectangle."""
        if self.empty:
            return None
        r = self.radius
        raw = Rect(
            min(self.p0[0], self.p1[0]) - r,
            min(self.p0[1], self.p1[1]) - r,
            max(self.p0[0], self.p1[0]) + r,
            max(self.p0[1], self.p1[1]) + r,
        )
        return raw.intersect(self.clip)


def blocked_region(link: Segment3, cyl: CylinderSpec, footprint: Rect) -> StadiumRegion:
    """Stadium region of blocker positions for one link, clipped to the
    room footprint."""
    spine = _clipped_spine(link.a, link.b, cyl.height)
    if spine is None:
        return StadiumRegion.empty_region(footprint)
    return StadiumRegion(spine[0], spine[1], cyl.radius, footprint)


def region_area(region: StadiumRegion, rel_tol: float = 1e-4) -> float:
    """Area of a stadium region by adaptive quadrature of its indicator."""
    if region.is_empty or region.radius == 0.0:
        return 0.0
    box = region.bbox()
    if box is None:
        return 0.0
    return integrate_region(
        region.signed_distance,
        None,
        (box.x0, box.y0, box.x1, box.y1),
        rel_tol=rel_tol,
        cut_scale=region.radius / 4.0,
    )
