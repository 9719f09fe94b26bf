"""Analytic target-occupancy engine.

For each target aspect ratio, enumerate hypothetical hidden target poses on a
grid, keep those whose projection is (almost) fully occluded in the observed
depth image, and accumulate their silhouettes into a 1D distribution over
image columns. Distributions are unnormalized mass: the quantities consumed
downstream (support sums and overlap ratios) are invariant to global scaling.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .camera import CameraSpec
from .render import Observation, _window_of, background_depth, shape_hit_depths
from .scene import ObjectShape, ShelfSpec

OCCLUSION_DEPTH_TOL = 1e-6

# Aspect ratios height:width, indexed j = 0, 1, 2.
ASPECT_RATIOS = (1, 2, 4)
DEFAULT_TARGET_WIDTH = 0.06


def target_shape_for_ratio(j: int, width: float = DEFAULT_TARGET_WIDTH) -> ObjectShape:
    """Cuboid target of the given aspect-ratio class: height = ratio * width."""
    return ObjectShape.cuboid(width, width, ASPECT_RATIOS[j] * width)


def default_target_shapes(width: float = DEFAULT_TARGET_WIDTH) -> tuple[ObjectShape, ...]:
    return tuple(target_shape_for_ratio(j, width) for j in range(len(ASPECT_RATIOS)))


@dataclass(frozen=True)
class AspectRatioSet:
    """The three height:width classes and which one the target belongs to."""

    ratios: tuple[int, ...] = ASPECT_RATIOS
    target_index: int = 0

    def __post_init__(self):
        if len(self.ratios) != 3:
            raise ValueError("exactly three aspect ratios")
        if not 0 <= self.target_index < 3:
            raise ValueError("target index out of range")


@dataclass(frozen=True)
class CandidateGrid:
    """Hypothetical-pose sampling: floor grid resolution and occlusion rule."""

    resolution: float = 0.01
    include_tops: bool = False
    hidden_fraction: float = 0.99

    def __post_init__(self):
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")


@dataclass(frozen=True, eq=False)
class OccupancyDistribution:
    """Per-ratio column-mass arrays P and their history encoding P'."""

    current: np.ndarray  # (3, w)
    encoded: np.ndarray  # (3, w), pointwise-min over the episode so far

    @property
    def width(self) -> int:
        return self.current.shape[1]

    def advance(self, new_current: np.ndarray) -> "OccupancyDistribution":
        return OccupancyDistribution(new_current, encode_history(new_current, self.encoded))


def _grid_points(lo: float, hi: float, res: float) -> np.ndarray:
    """lo + k*res up to hi inclusive; anchored at lo so refinements nest."""
    if hi < lo:
        return np.empty(0)
    n = int(np.floor((hi - lo) / res + 1e-9)) + 1
    return lo + res * np.arange(n)


def _pose_column_mass(
    shape: ObjectShape,
    x: float,
    y: float,
    z: float,
    obs_depth: np.ndarray,
    camera: CameraSpec,
    hidden_fraction: float,
) -> tuple[int, np.ndarray] | None:
    """Column histogram of the pose's silhouette if the pose is hidden, else None."""
    rows, cols = _window_of(shape, x, y, z, camera)
    t = shape_hit_depths(shape, x, y, z, camera, cols, rows)
    silhouette = np.isfinite(t)
    total = int(silhouette.sum())
    if total == 0:
        return None
    occluded = silhouette & (obs_depth[rows, cols] < t - OCCLUSION_DEPTH_TOL)
    if int(occluded.sum()) < hidden_fraction * total:
        return None
    return cols.start, silhouette.sum(axis=0).astype(np.float64)


def compute_occupancy(
    obs: Observation,
    target_shapes: tuple[ObjectShape, ...],
    grid: CandidateGrid,
    camera: CameraSpec,
    shelf: ShelfSpec,
    target_id: int | None = None,
    target_ratio: int | None = None,
    top_surfaces: list[tuple[float, float, float, float, float]] | None = None,
) -> OccupancyDistribution:
    """Exact pose-enumeration occupancy; returns P with P' initialized to P.

    When the target is partially visible (and identified via target_id /
    target_ratio), its ratio's distribution collapses to contain only the
    target object: the column histogram of its full projection at the now
    pinned-down pose, so support against it points at whatever still covers
    the hidden remainder.
    """
    w = camera.width
    current = np.zeros((len(target_shapes), w), dtype=np.float64)

    for j, shape in enumerate(target_shapes):
        if (
            target_ratio is not None
            and j == target_ratio
            and target_id is not None
            and obs.target_visibility > 0
        ):
            if obs.target_column_histogram is not None:
                current[j] = obs.target_column_histogram.astype(np.float64)
            elif target_id in obs.masks:
                current[j] = obs.masks[target_id].sum(axis=0).astype(np.float64)
            continue

        if shape.height > shelf.height:
            continue
        xs = _grid_points(shelf.x_min + shape.half_x, shelf.x_max - shape.half_x, grid.resolution)
        ys = _grid_points(shelf.y_back + shape.half_y, shelf.y_front - shape.half_y, grid.resolution)
        for y in ys:
            for x in xs:
                hit = _pose_column_mass(shape, x, y, 0.0, obs.depth, camera, grid.hidden_fraction)
                if hit is not None:
                    col0, mass = hit
                    current[j, col0 : col0 + mass.size] += mass
        if grid.include_tops and top_surfaces:
            for x_lo, x_hi, y_lo, y_hi, z_top in top_surfaces:
                if z_top + shape.height > shelf.height:
                    continue
                txs = _grid_points(x_lo + shape.half_x, x_hi - shape.half_x, grid.resolution)
                tys = _grid_points(y_lo + shape.half_y, y_hi - shape.half_y, grid.resolution)
                for y in tys:
                    for x in txs:
                        hit = _pose_column_mass(
                            shape, x, y, z_top, obs.depth, camera, grid.hidden_fraction
                        )
                        if hit is not None:
                            col0, mass = hit
                            current[j, col0 : col0 + mass.size] += mass

    return OccupancyDistribution(current, current.copy())


def compute_occupancy_fast(
    depth: np.ndarray,
    target_shapes: tuple[ObjectShape, ...],
    grid: CandidateGrid,
    camera: CameraSpec,
    shelf: ShelfSpec,
) -> np.ndarray:
    """Front-face approximation of compute_occupancy for rollout planning.

    Each pose's silhouette is approximated by its front-face rectangle, which
    vectorizes the occlusion test across a whole row of x-candidates via
    prefix sums. Returns the (3, w) current array only.
    """
    w = camera.width
    current = np.zeros((len(target_shapes), w), dtype=np.float64)

    for j, shape in enumerate(target_shapes):
        if shape.height > shelf.height:
            continue
        xs = _grid_points(shelf.x_min + shape.half_x, shelf.x_max - shape.half_x, grid.resolution)
        ys = _grid_points(shelf.y_back + shape.half_y, shelf.y_front - shape.half_y, grid.resolution)
        if xs.size == 0:
            continue
        for y in ys:
            t_front = camera.depth_of_y(y + shape.half_y)
            if t_front <= 0:
                continue
            v_lo = int(np.ceil(camera.row_of_z(shape.height, t_front)))
            v_hi = int(np.floor(camera.row_of_z(0.0, t_front)))
            v_lo = max(v_lo, 0)
            v_hi = min(v_hi, camera.height - 1)
            if v_lo > v_hi:
                continue
            occluded_cols = (depth[v_lo : v_hi + 1, :] < t_front - OCCLUSION_DEPTH_TOL).sum(axis=0)
            pref = np.concatenate(([0], np.cumsum(occluded_cols)))
            rows_count = v_hi - v_lo + 1

            u_left = camera.column_of_x(xs + shape.half_x, t_front)
            u_right = camera.column_of_x(xs - shape.half_x, t_front)
            lo = np.ceil(u_left).astype(int)
            hi = np.floor(u_right).astype(int)
            lo = np.clip(lo, 0, w - 1)
            hi = np.clip(hi, 0, w - 1)
            valid = lo <= hi
            total = (hi - lo + 1) * rows_count
            occ = pref[hi + 1] - pref[lo]
            feasible = valid & (occ >= grid.hidden_fraction * total)
            for k in np.flatnonzero(feasible):
                current[j, lo[k] : hi[k] + 1] += rows_count

    return current


def encode_history(current: np.ndarray, previous: np.ndarray | None) -> np.ndarray:
    """Pointwise minimum with the previous encoding; identity at t = 0."""
    current = np.asarray(current, dtype=np.float64)
    if previous is None:
        return current.copy()
    previous = np.asarray(previous, dtype=np.float64)
    if current.shape != previous.shape:
        raise ValueError(f"shape mismatch: {current.shape} vs {previous.shape}")
    return np.minimum(current, previous)


def support(encoded: np.ndarray, left: int, right: int) -> float:
    """Inclusive sum of a 1D distribution over columns [left, right]."""
    encoded = np.asarray(encoded)
    if encoded.ndim != 1:
        raise ValueError("support expects a single ratio's 1D array")
    if not (0 <= left <= right < encoded.size):
        raise ValueError(f"column range [{left}, {right}] out of bounds for width {encoded.size}")
    return float(encoded[left : right + 1].sum())


def reduction_of_support(sigma_before: float, sigma_after: float) -> float:
    """Signed drop in support; negative when the object moved into the mass."""
    return sigma_before - sigma_after


def outcome_probabilities(
    encoded: np.ndarray, columns: np.ndarray, target_ratio: int
) -> tuple[float, float, float]:
    """Probabilities of (target revealed, nothing behind, something else behind).

    encoded: (3, w) history-encoded distributions; columns: boolean column
    indicator of the moved object's extent; target_ratio: index j'.
    """
    encoded = np.asarray(encoded, dtype=np.float64)
    columns = np.asarray(columns, dtype=bool)
    totals = encoded.sum(axis=1)
    pooled_total = float(totals.sum())
    if pooled_total <= 0.0:
        return (0.0, 1.0, 0.0)

    overlaps = encoded[:, columns].sum(axis=1)
    p1 = float(overlaps[target_ratio] / totals[target_ratio]) if totals[target_ratio] > 0 else 0.0
    p2 = 1.0 - float(overlaps.sum()) / pooled_total
    p3 = 1.0 - p1 - p2

    probs = np.array([p1, p2, p3])
    clipped = np.clip(probs, 0.0, 1.0)
    if not np.array_equal(probs, clipped):
        clipped /= clipped.sum()
    return (float(clipped[0]), float(clipped[1]), float(clipped[2]))


def dump_occupancy_csv(dist: OccupancyDistribution, path) -> None:
    """Per-column CSV of current and encoded distributions (debug aid)."""
    w = dist.width
    with open(path, "w") as f:
        f.write("x,P0,P1,P2,Pp0,Pp1,Pp2\n")
        for x in range(w):
            cur = ",".join(format(dist.current[j, x], ".17g") for j in range(3))
            enc = ",".join(format(dist.encoded[j, x], ".17g") for j in range(3))
            f.write(f"{x},{cur},{enc}\n")
