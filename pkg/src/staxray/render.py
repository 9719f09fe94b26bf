"""Software depth renderer: z-buffer over analytic ray-shape intersections.

Depth is planar (distance along -y from the camera plane). Background is the
empty shelf seen from the camera: infinite floor and back wall, plus side
walls and ceiling clipped to the shelf interior. None of these can occlude a
valid in-shelf object, so compositing objects over the background with a
per-pixel minimum is exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .camera import CameraSpec
from .scene import CUBOID, ObjectShape, SceneState, ShelfSpec

BACKWALL = "BACKWALL"
HALFWAY = "HALFWAY"


@dataclass(frozen=True, eq=False)
class Observation:
    """Depth image, visible-pixel masks per object, and target visibility."""

    depth: np.ndarray  # (h, w) meters
    masks: dict[int, np.ndarray]  # id -> (h, w) bool, visible pixels only
    target_visibility: float
    full_target_mask_area: int
    # Column histogram (length w) of the target's unoccluded projection at its
    # current pose; the sensing model grants exact target extent once any part
    # of it is visible. None when the scene has no target.
    target_column_histogram: np.ndarray | None = None

    def mask_area(self, obj_id: int) -> int:
        m = self.masks.get(obj_id)
        return 0 if m is None else int(m.sum())


@lru_cache(maxsize=8)
def background_depth(camera: CameraSpec, shelf: ShelfSpec) -> np.ndarray:
    """Empty-shelf depth image; read-only (cached)."""
    a_u, b_v = camera.ray_slopes()
    a = a_u[None, :]
    b = b_v[:, None]
    h, w = camera.height, camera.width
    t_back = camera.depth_of_y(shelf.y_back)
    bg = np.full((h, w), t_back, dtype=np.float64)

    with np.errstate(divide="ignore", invalid="ignore"):
        # Floor plane z = 0 (extends beyond the shelf toward the camera).
        t_floor = np.where(b > 0, camera.cam_z / b, np.inf)
        # Ceiling z = height, only over the shelf interior depth range.
        t_ceil = np.where(b < 0, (camera.cam_z - shelf.height) / b, np.inf)
        y_ceil = camera.cam_y - t_ceil
        t_ceil = np.where((y_ceil >= shelf.y_back) & (y_ceil <= shelf.y_front), t_ceil, np.inf)
        # Side walls x = x_min / x_max clipped to the interior in y and z.
        for x_side, cond in ((shelf.x_min, a > 0), (shelf.x_max, a < 0)):
            t_wall = np.where(cond, (camera.cam_x - x_side) / np.where(cond, a, 1.0), np.inf)
            y_wall = camera.cam_y - t_wall
            z_wall = camera.cam_z - t_wall * b
            ok = (
                (y_wall >= shelf.y_back)
                & (y_wall <= shelf.y_front)
                & (z_wall >= 0.0)
                & (z_wall <= shelf.height)
            )
            bg = np.minimum(bg, np.where(ok, t_wall, np.inf))

    bg = np.minimum(bg, np.broadcast_to(t_floor, (h, w)))
    bg = np.minimum(bg, np.broadcast_to(t_ceil, (h, w)))
    bg.setflags(write=False)
    return bg


def _slab_interval(origin: float, lo: float, hi: float, slope) -> tuple[np.ndarray, np.ndarray]:
    """t-interval where origin - t*slope lies in [lo, hi]; slope is an array."""
    slope = np.asarray(slope, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (origin - hi) / slope
        t2 = (origin - lo) / slope
    t_lo = np.minimum(t1, t2)
    t_hi = np.maximum(t1, t2)
    degenerate = slope == 0.0
    if np.any(degenerate):
        inside = (origin >= lo) & (origin <= hi)
        t_lo = np.where(degenerate, np.where(inside, -np.inf, np.inf), t_lo)
        t_hi = np.where(degenerate, np.where(inside, np.inf, -np.inf), t_hi)
    return t_lo, t_hi


def shape_hit_depths(
    shape: ObjectShape,
    x: float,
    y: float,
    z: float,
    camera: CameraSpec,
    cols: np.ndarray | slice | None = None,
    rows: np.ndarray | slice | None = None,
) -> np.ndarray:
    """Planar hit depth per pixel (inf where the ray misses the solid)."""
    a_u, b_v = camera.ray_slopes()
    if cols is not None:
        a_u = a_u[cols]
    if rows is not None:
        b_v = b_v[rows]
    a = a_u[None, :]
    b = b_v[:, None]

    z_lo, z_hi = _slab_interval(camera.cam_z, z, z + shape.height, b)
    if shape.kind == CUBOID:
        ex, ey = shape.dims[0], shape.dims[1]
        x_lo, x_hi = _slab_interval(camera.cam_x, x - 0.5 * ex, x + 0.5 * ex, a)
        y_lo = camera.cam_y - (y + 0.5 * ey)
        y_hi = camera.cam_y - (y - 0.5 * ey)
        entry = np.maximum(np.maximum(x_lo, z_lo), y_lo)
        exit_ = np.minimum(np.minimum(x_hi, z_hi), y_hi)
    else:
        r = shape.dims[0]
        dx0 = camera.cam_x - x
        dy0 = camera.cam_y - y
        qa = a * a + 1.0
        qb = dx0 * a + dy0
        qc = dx0 * dx0 + dy0 * dy0 - r * r
        disc = qb * qb - qa * qc
        root = np.sqrt(np.maximum(disc, 0.0))
        r_lo = np.where(disc >= 0.0, (qb - root) / qa, np.inf)
        r_hi = np.where(disc >= 0.0, (qb + root) / qa, -np.inf)
        entry = np.maximum(r_lo, z_lo)
        exit_ = np.minimum(r_hi, z_hi)

    hit = (entry <= exit_) & (exit_ >= 0.0)
    return np.where(hit, np.maximum(entry, 0.0), np.inf)


def _window_of(shape: ObjectShape, x: float, y: float, z: float, camera: CameraSpec):
    """Conservative (rows, cols) index ranges covering the shape's projection."""
    hx, hy = shape.half_x, shape.half_y
    us, vs = [], []
    for cx in (x - hx, x + hx):
        for cy in (y - hy, y + hy):
            t = camera.depth_of_y(cy)
            if t <= 0:
                return slice(0, camera.height), slice(0, camera.width)
            for cz in (z, z + shape.height):
                us.append(camera.column_of_x(cx, t))
                vs.append(camera.row_of_z(cz, t))
    lo_u = max(0, int(np.floor(min(us))) - 1)
    hi_u = min(camera.width, int(np.ceil(max(us))) + 2)
    lo_v = max(0, int(np.floor(min(vs))) - 1)
    hi_v = min(camera.height, int(np.ceil(max(vs))) + 2)
    if lo_u >= hi_u or lo_v >= hi_v:
        return slice(0, 0), slice(0, 0)
    return slice(lo_v, hi_v), slice(lo_u, hi_u)


def render(state: SceneState, camera: CameraSpec) -> Observation:
    """Z-buffer all objects over the shelf background; nearest surface wins."""
    if camera.fx <= 0 or camera.fy <= 0 or camera.width <= 0 or camera.height <= 0:
        raise ValueError("invalid camera spec")
    depth = background_depth(camera, state.shelf).copy()
    owner = np.full(depth.shape, -1, dtype=np.int32)

    for obj in sorted(state.objects, key=lambda o: o.id):
        rows, cols = _window_of(obj.shape, obj.x, obj.y, obj.z, camera)
        t = shape_hit_depths(obj.shape, obj.x, obj.y, obj.z, camera, cols, rows)
        win_depth = depth[rows, cols]
        closer = t < win_depth
        if not closer.any():
            continue
        depth[rows, cols] = np.where(closer, t, win_depth)
        win_owner = owner[rows, cols]
        owner[rows, cols] = np.where(closer, obj.id, win_owner)

    masks = {}
    for obj in state.objects:
        m = owner == obj.id
        if m.any():
            masks[obj.id] = m

    target = state.target
    visibility = 0.0
    full_area = 0
    column_hist = None
    if target is not None:
        rows, cols = _window_of(target.shape, target.x, target.y, target.z, camera)
        t = shape_hit_depths(target.shape, target.x, target.y, target.z, camera, cols, rows)
        bg = background_depth(camera, state.shelf)[rows, cols]
        silhouette = t < bg
        full_area = int(silhouette.sum())
        visible = int(masks[target.id].sum()) if target.id in masks else 0
        visibility = visible / full_area if full_area > 0 else 0.0
        column_hist = np.zeros(camera.width, dtype=np.int64)
        column_hist[cols] = silhouette.sum(axis=0)

    return Observation(
        depth=depth,
        masks=masks,
        target_visibility=visibility,
        full_target_mask_area=full_area,
        target_column_histogram=column_hist,
    )


def object_column_extent(obs: Observation, obj_id: int) -> tuple[int, int]:
    """Leftmost and rightmost image columns containing a visible pixel."""
    mask = obs.masks.get(obj_id)
    if mask is None or not mask.any():
        raise ValueError(f"object {obj_id} has no visible pixels")
    cols = np.flatnonzero(mask.any(axis=0))
    return int(cols[0]), int(cols[-1])


@dataclass(frozen=True, eq=False)
class PredictedImage:
    """Hypothetical post-action image used by rollout planning."""

    depth: np.ndarray
    masks: dict[int, np.ndarray]
    phantom_id: int | None = None


def predict_depth_after(
    obs: Observation,
    camera: CameraSpec,
    shelf: ShelfSpec,
    moved_id: int,
    shape: ObjectShape,
    new_pose: tuple[float, float, float],
    outcome: str,
) -> PredictedImage:
    """Evolve the depth image for a hypothetical move of one object.

    The vacated pixels become background depth (BACKWALL) or a phantom
    surface at the per-pixel midpoint between the old surface and the
    background (HALFWAY); the moved object is re-rendered at its new pose
    and composited by depth.
    """
    vacated = obs.masks.get(moved_id)
    if vacated is None or not vacated.any():
        raise ValueError(f"object {moved_id} has an empty mask")
    x, y, z = new_pose
    rows, cols = _window_of(shape, x, y, z, camera)
    if rows == slice(0, 0) or cols == slice(0, 0):
        raise ValueError("new placement projects outside the image")

    bg = background_depth(camera, shelf)
    depth = obs.depth.copy()
    masks = {i: m for i, m in obs.masks.items() if i != moved_id}
    phantom_id = None

    if outcome == BACKWALL:
        depth[vacated] = bg[vacated]
    elif outcome == HALFWAY:
        depth[vacated] = 0.5 * (obs.depth[vacated] + bg[vacated])
        phantom_id = max(obs.masks.keys(), default=0) + 1
        masks[phantom_id] = vacated.copy()
    else:
        raise ValueError(f"unknown outcome {outcome!r}")

    t = shape_hit_depths(shape, x, y, z, camera, cols, rows)
    win_depth = depth[rows, cols]
    closer = t < win_depth
    if closer.any():
        depth[rows, cols] = np.where(closer, t, win_depth)
        new_mask = np.zeros(depth.shape, dtype=bool)
        new_mask[rows, cols] = closer
        for i in list(masks.keys()):
            kept = masks[i] & ~new_mask
            if kept.any():
                masks[i] = kept
            else:
                del masks[i]
        masks[moved_id] = new_mask

    return PredictedImage(depth=depth, masks=masks, phantom_id=phantom_id)


def dump_depth_pgm(depth: np.ndarray, path: str | Path, max_depth: float = 2.0) -> None:
    """16-bit PGM debug dump; depth clipped to [0, max_depth] meters."""
    scaled = np.clip(depth / max_depth, 0.0, 1.0)
    img = (scaled * 65535).astype(">u2")
    h, w = img.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n65535\n".encode())
        f.write(img.tobytes())


def dump_mask_pgm(mask: np.ndarray, path: str | Path) -> None:
    img = np.where(mask, 65535, 0).astype(">u2")
    h, w = img.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n65535\n".encode())
        f.write(img.tobytes())
