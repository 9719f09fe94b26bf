"""Pinhole depth camera looking into the shelf along -y.

Depth values are planar: the distance from the camera plane along -y, not
the Euclidean ray length. A camera at (0, cam_y, cam_z) sees the pixel-(u, v)
ray as

    X(t) = cam_x - t * A_u,   A_u = (u - cx) / fx
    Y(t) = cam_y - t
    Z(t) = cam_z - t * B_v,   B_v = (v - cy) / fy

with t >= 0 the planar depth. u indexes columns (increasing left to right in
the image maps to decreasing world x), v indexes rows (increasing downward
maps to decreasing world z).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class CameraSpec:
    width: int = 512
    height: int = 320
    fx: float = 450.0
    fy: float = 450.0
    cam_x: float = 0.0
    cam_y: float = 1.0
    cam_z: float = 0.25

    @property
    def cx(self) -> float:
        return (self.width - 1) / 2.0

    @property
    def cy(self) -> float:
        return (self.height - 1) / 2.0

    def ray_slopes(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-column A_u and per-row B_v slope arrays."""
        u = np.arange(self.width, dtype=np.float64)
        v = np.arange(self.height, dtype=np.float64)
        return (u - self.cx) / self.fx, (v - self.cy) / self.fy

    def column_of_x(self, x: float, depth: float) -> float:
        """Fractional image column of world x at planar depth from the camera."""
        return self.cx + self.fx * (self.cam_x - x) / depth

    def row_of_z(self, z: float, depth: float) -> float:
        """Fractional image row of world z at planar depth from the camera."""
        return self.cy + self.fy * (self.cam_z - z) / depth

    def x_of_column(self, u: float, depth: float) -> float:
        return self.cam_x - depth * (u - self.cx) / self.fx

    def z_of_row(self, v: float, depth: float) -> float:
        return self.cam_z - depth * (v - self.cy) / self.fy

    def depth_of_y(self, y: float) -> float:
        """Planar depth of the world plane at constant y."""
        return self.cam_y - y
