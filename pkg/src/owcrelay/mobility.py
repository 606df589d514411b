"""Stationary blocker position statistics under random waypoint motion.

A single pedestrian moves between uniformly drawn waypoints on the floor
rectangle.  Observed at a random instant, each coordinate of the position
follows the classical parabolic stationary density, and the two coordinates
are independent, so the plane density is the product of two parabolas.  The
blocking probability of a link is the integral of that density over the
link's stadium region.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from owcrelay.geometry import (
    CylinderSpec,
    Rect,
    Segment3,
    StadiumRegion,
    blocked_region,
)
from owcrelay.quadrature import integrate_region

__all__ = [
    "RwpDistribution",
    "BlockageProbabilityTable",
    "rwp_pdf",
    "blockage_probability",
    "relay_path_blockage_probability",
    "region_probability",
    "union_region_probability",
    "sample_human_positions",
    "sample_human_position",
]

_SAMPLE_CHUNK = 65536


def _axis_pdf(coord, origin: float, extent: float) -> np.ndarray:
    """Marginal density 6/L^3 * (L^2/4 - s^2), s centred on the axis."""
    s = np.asarray(coord, dtype=float) - (origin + extent / 2.0)
    val = (6.0 / extent**3) * (extent**2 / 4.0 - s * s)
    return np.where(np.abs(s) <= extent / 2.0, np.maximum(val, 0.0), 0.0)


@dataclass(frozen=True)
class RwpDistribution:
    """Product-form stationary density on the floor rectangle.

    ``origin_x``/``origin_y`` place the rectangle's corner in the shared
    corner-origin frame; evaluation shifts to centred coordinates
    internally.
    """

    x_extent: float = 4.0
    y_extent: float = 8.0
    origin_x: float = 0.0
    origin_y: float = 0.0

    def __post_init__(self):
        if self.x_extent <= 0 or self.y_extent <= 0:
            raise ValueError("floor extents must be positive")

    @property
    def floor_rect(self) -> Rect:
        return Rect(
            self.origin_x,
            self.origin_y,
            self.origin_x + self.x_extent,
            self.origin_y + self.y_extent,
        )

    @property
    def peak_density(self) -> float:
        # both parabolas peak at the centre: (3/2L)^2 scaled by 1/L
        return 2.25 / (self.x_extent * self.y_extent)

    @property
    def variances(self) -> tuple[float, float]:
        """Per-axis variance of the stationary position, L^2/20."""
        return (self.x_extent**2 / 20.0, self.y_extent**2 / 20.0)

    def pdf(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return _axis_pdf(pts[:, 0], self.origin_x, self.x_extent) * _axis_pdf(
            pts[:, 1], self.origin_y, self.y_extent
        )

    def pdf_xy(self, x, y) -> np.ndarray:
        return _axis_pdf(x, self.origin_x, self.x_extent) * _axis_pdf(
            y, self.origin_y, self.y_extent
        )


@dataclass(frozen=True)
class BlockageProbabilityTable:
    """Per-link blocking probabilities plus how they were computed."""

    probabilities: Mapping[str, float]
    rel_tol: float
    cylinder: CylinderSpec

    def __post_init__(self):
        for link_id, p in self.probabilities.items():
            if not 0.0 <= p <= 1.0 + 1e-12:
                raise ValueError(f"probability for {link_id} outside [0, 1]: {p}")

    def __getitem__(self, link_id: str) -> float:
        return self.probabilities[link_id]


def rwp_pdf(dist: RwpDistribution, point):
    """Stationary plane density at a corner-origin floor point.

    Accepts one (x, y) pair or an (N, 2) array; points outside the floor
    rectangle evaluate to zero.
    """
    pts = np.asarray(point, dtype=float)
    out = dist.pdf(pts)
    if pts.ndim == 1:
        return float(out[0])
    return out


def region_probability(
    region: StadiumRegion, dist: RwpDistribution, rel_tol: float = 1e-4
) -> float:
    """Probability mass of one stadium region under the stationary density."""
    if region.is_empty or region.radius == 0.0:
        return 0.0
    box = region.bbox()
    if box is None:
        return 0.0
    box = box.intersect(dist.floor_rect)
    if box is None:
        return 0.0
    return integrate_region(
        region.signed_distance,
        dist.pdf,
        (box.x0, box.y0, box.x1, box.y1),
        rel_tol=rel_tol,
        cut_scale=region.radius / 4.0,
    )


def union_region_probability(
    regions, dist: RwpDistribution, rel_tol: float = 1e-4
) -> float:
    """Probability mass of a union of stadium regions.

    Integrates a single pointwise-minimum distance field, so overlap is
    handled exactly rather than by summing per-region masses.
    """
    live = [r for r in regions if not r.is_empty and r.radius > 0.0]
    if not live:
        return 0.0
    boxes = [r.bbox() for r in live]
    boxes = [b for b in boxes if b is not None]
    if not boxes:
        return 0.0
    hull = Rect(
        min(b.x0 for b in boxes),
        min(b.y0 for b in boxes),
        max(b.x1 for b in boxes),
        max(b.y1 for b in boxes),
    ).intersect(dist.floor_rect)
    if hull is None:
        return 0.0

    def union_sdf(points):
        sds = []
        grads = []
        for r in live:
            sd, g = r.signed_distance(points)
            sds.append(sd)
            grads.append(g)
        sds = np.stack(sds)
        grads = np.stack(grads)
        pick = np.argmin(sds, axis=0)
        cols = np.arange(points.shape[0])
        return sds[pick, cols], grads[pick, cols]

    return integrate_region(
        union_sdf,
        dist.pdf,
        (hull.x0, hull.y0, hull.x1, hull.y1),
        rel_tol=rel_tol,
        cut_scale=min(r.radius for r in live) / 4.0,
    )


def blockage_probability(
    link: Segment3,
    cyl: CylinderSpec,
    dist: RwpDistribution,
    rel_tol: float = 1e-4,
) -> float:
    """Probability that the stationary blocker position breaks one link."""
    region = blocked_region(link, cyl, dist.floor_rect)
    return region_probability(region, dist, rel_tol)


def relay_path_blockage_probability(
    ap_to_relay: Segment3,
    relay_to_user: Segment3,
    cyl: CylinderSpec,
    dist: RwpDistribution,
    rel_tol: float = 1e-4,
) -> float:
    """Probability that one blocker position breaks a two-hop relayed path.

    The path fails when either hop is blocked, so the event is the union of
    the two stadium regions.
    """
    regions = [
        blocked_region(ap_to_relay, cyl, dist.floor_rect),
        blocked_region(relay_to_user, cyl, dist.floor_rect),
    ]
    return union_region_probability(regions, dist, rel_tol)


def sample_human_positions(dist: RwpDistribution, n: int, rng) -> np.ndarray:
    """Draw ``n`` stationary positions, shape (n, 2), by rejection against a
    uniform envelope at the peak density.

    ``rng`` is a seed or a numpy Generator.  The chunked draw pattern is
    fixed, so a given generator state always yields the same output.
    """
    if n < 0:
        raise ValueError("sample count must be non-negative")
    gen = np.random.default_rng(rng)
    rect = dist.floor_rect
    peak = dist.peak_density
    out = np.empty((n, 2))
    filled = 0
    while filled < n:
        draw = gen.random((_SAMPLE_CHUNK, 3))
        xs = rect.x0 + rect.width * draw[:, 0]
        ys = rect.y0 + rect.height * draw[:, 1]
        keep = draw[:, 2] * peak <= dist.pdf_xy(xs, ys)
        kx = xs[keep]
        ky = ys[keep]
        take = min(kx.size, n - filled)
        out[filled : filled + take, 0] = kx[:take]
        out[filled : filled + take, 1] = ky[:take]
        filled += take
    return out


def sample_human_position(dist: RwpDistribution, rng) -> tuple[float, float]:
    """Draw one stationary position as an (x, y) tuple."""
    pos = sample_human_positions(dist, 1, rng)
    return (float(pos[0, 0]), float(pos[0, 1]))
