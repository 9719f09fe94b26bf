"""2D footprint geometry: overlap, containment, and axis-aligned contact sweeps.

All objects are upright cylinders or axis-aligned boxes, so every collision
and containment query reduces to exact circle/rectangle math in the shelf
plane plus a z-interval test. Footprints are expressed in shelf coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

# Tolerance for containment / contact / interval checks, in meters.
GEOM_TOL = 1e-6


@dataclass(frozen=True)
class RectFootprint:
    """Axis-aligned rectangle: center (cx, cy), half-extents (hx, hy)."""

    cx: float
    cy: float
    hx: float
    hy: float

    @property
    def area(self) -> float:
        return 4.0 * self.hx * self.hy

    def translated(self, dx: float, dy: float) -> "RectFootprint":
        return RectFootprint(self.cx + dx, self.cy + dy, self.hx, self.hy)


@dataclass(frozen=True)
class CircleFootprint:
    """Circle: center (cx, cy), radius r."""

    cx: float
    cy: float
    r: float

    @property
    def area(self) -> float:
        return math.pi * self.r * self.r

    def translated(self, dx: float, dy: float) -> "CircleFootprint":
        return CircleFootprint(self.cx + dx, self.cy + dy, self.r)


Footprint = RectFootprint | CircleFootprint


def footprints_overlap(a: Footprint, b: Footprint, tol: float = GEOM_TOL) -> bool:
    """True if the two footprints overlap by more than `tol`.

    Touching contact (separation within tol) does not count as overlap.
    """
    if isinstance(a, RectFootprint) and isinstance(b, RectFootprint):
        return (
            abs(a.cx - b.cx) < a.hx + b.hx - tol
            and abs(a.cy - b.cy) < a.hy + b.hy - tol
        )
    if isinstance(a, CircleFootprint) and isinstance(b, CircleFootprint):
        d2 = (a.cx - b.cx) ** 2 + (a.cy - b.cy) ** 2
        rsum = a.r + b.r - tol
        if rsum <= 0.0:
            return False
        return d2 < rsum * rsum
    # Mixed: exact point-rectangle distance against the circle radius.
    if isinstance(a, CircleFootprint):
        circ, rect = a, b
    else:
        circ, rect = b, a
    dx = max(abs(circ.cx - rect.cx) - rect.hx, 0.0)
    dy = max(abs(circ.cy - rect.cy) - rect.hy, 0.0)
    reff = circ.r - tol
    if reff <= 0.0:
        return False
    return dx * dx + dy * dy < reff * reff


def footprint_contains(outer: Footprint, inner: Footprint, tol: float = GEOM_TOL) -> bool:
    """True if `inner` lies entirely inside `outer` (within tol)."""
    if isinstance(outer, RectFootprint):
        if isinstance(inner, RectFootprint):
            return (
                abs(inner.cx - outer.cx) + inner.hx <= outer.hx + tol
                and abs(inner.cy - outer.cy) + inner.hy <= outer.hy + tol
            )
        return (
            abs(inner.cx - outer.cx) + inner.r <= outer.hx + tol
            and abs(inner.cy - outer.cy) + inner.r <= outer.hy + tol
        )
    if isinstance(inner, CircleFootprint):
        d = math.hypot(inner.cx - outer.cx, inner.cy - outer.cy)
        return d + inner.r <= outer.r + tol
    # Rectangle inside circle: all four corners within the radius.
    for sx in (-1.0, 1.0):
        for sy in (-1.0, 1.0):
            px = inner.cx + sx * inner.hx
            py = inner.cy + sy * inner.hy
            if math.hypot(px - outer.cx, py - outer.cy) > outer.r + tol:
                return False
    return True


def _contact_halfwidth(moving: Footprint, static: Footprint, off_perp: float) -> float | None:
    """Half-width of the contact interval along the motion axis.

    For two footprints whose centers are offset by `off_perp` on the axis
    perpendicular to the motion, returns c such that the footprints touch
    when the along-axis center offset equals c (Minkowski-sum expansion of
    `static` by `moving`). None if they can never touch at this offset.

    Both footprint types are symmetric in x/y, so the same formula serves
    motion along either axis with (half_along, half_perp) chosen by caller.
    This helper assumes the caller already swapped extents appropriately and
    passes footprints whose hx is the along-axis half-extent.
    """
    if isinstance(moving, RectFootprint) and isinstance(static, RectFootprint):
        if abs(off_perp) >= moving.hy + static.hy:
            return None
        return moving.hx + static.hx
    if isinstance(moving, CircleFootprint) and isinstance(static, CircleFootprint):
        rsum = moving.r + static.r
        if abs(off_perp) >= rsum:
            return None
        return math.sqrt(rsum * rsum - off_perp * off_perp)
    if isinstance(moving, CircleFootprint):
        r, h_along, h_perp = moving.r, static.hx, static.hy
    else:
        r, h_along, h_perp = static.r, moving.hx, moving.hy
    gap = abs(off_perp) - h_perp
    if gap >= r:
        return None
    if gap <= 0.0:
        return h_along + r
    return h_along + math.sqrt(r * r - gap * gap)


def _along_perp(fp: Footprint, axis: str) -> Footprint:
    """Return a footprint whose hx is the half-extent along `axis`."""
    if isinstance(fp, CircleFootprint) or axis == "x":
        return fp
    return RectFootprint(fp.cy, fp.cx, fp.hy, fp.hx)


def slide_limit(
    moving: Footprint,
    static: Footprint,
    axis: str,
    direction: float,
    clearance: float = GEOM_TOL,
) -> float:
    """Maximum distance `moving` can slide along +/-`axis` before touching `static`.

    `direction` is +1.0 or -1.0. Returns math.inf when no contact is possible
    at the current perpendicular offset; a negative result means the pair
    already overlaps along the motion axis.
    """
    if axis == "x":
        off_along = static.cx - moving.cx
        off_perp = static.cy - moving.cy
    else:
        off_along = static.cy - moving.cy
        off_perp = static.cx - moving.cx
    half = _contact_halfwidth(_along_perp(moving, axis), _along_perp(static, axis), off_perp)
    if half is None:
        return math.inf
    ahead = direction * off_along
    if ahead < 0 and -ahead >= half:
        return math.inf  # static lies strictly behind the motion
    # First contact at |off_along - direction*d| == half.
    return ahead - half - clearance


def interval_overlap(lo1: float, hi1: float, lo2: float, hi2: float, tol: float = GEOM_TOL) -> bool:
    """True if [lo1, hi1] and [lo2, hi2] overlap by more than tol."""
    return min(hi1, hi2) - max(lo1, lo2) > tol
