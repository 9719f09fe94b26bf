"""Approximate scene reconstruction from a (predicted) depth image.

Rollout planning evolves depth images, not ground-truth states, so deeper
action generation needs geometry recovered from masks alone. Every mask
becomes a floor-standing cuboid: front face at the mask's nearest depth,
lateral extent from its column span, height from its top row, and depth
extent capped by the back wall. This is deliberately coarse — it exists to
give the planner a plausible action set, not to invert rendering — and is
kept in one place so the approximation is auditable.
"""

from __future__ import annotations

import numpy as np

from .camera import CameraSpec
from .scene import ObjectInstance, ObjectShape, SceneState, ShelfSpec

MIN_EXTENT = 2e-3


def reconstruct_scene(
    depth: np.ndarray,
    masks: dict[int, np.ndarray],
    camera: CameraSpec,
    shelf: ShelfSpec,
) -> SceneState:
    objects = []
    for obj_id in sorted(masks.keys()):
        mask = masks[obj_id]
        if not mask.any():
            continue
        t_front = float(depth[mask].min())
        if t_front <= 0:
            continue
        rows = np.flatnonzero(mask.any(axis=1))
        cols = np.flatnonzero(mask.any(axis=0))
        x_hi = camera.x_of_column(cols[0] - 0.5, t_front)
        x_lo = camera.x_of_column(cols[-1] + 0.5, t_front)
        z_top = camera.z_of_row(rows[0] - 0.5, t_front)

        x_lo = max(x_lo, shelf.x_min)
        x_hi = min(x_hi, shelf.x_max)
        z_top = min(max(z_top, MIN_EXTENT), shelf.height)
        extent_x = x_hi - x_lo
        if extent_x < MIN_EXTENT:
            continue

        y_front = camera.cam_y - t_front
        y_front = min(max(y_front, shelf.y_back + MIN_EXTENT), shelf.y_front)
        extent_y = min(extent_x, y_front - shelf.y_back)
        if extent_y < MIN_EXTENT:
            continue

        objects.append(
            ObjectInstance(
                id=obj_id,
                shape=ObjectShape.cuboid(extent_x, extent_y, z_top),
                x=0.5 * (x_lo + x_hi),
                y=y_front - 0.5 * extent_y,
                z=0.0,
            )
        )
    return SceneState(shelf=shelf, objects=tuple(objects))
