"""Pinhole camera over the planar world.

The camera sits at the ego front center at a fixed mount height, looking
along the ego heading.  World objects are extruded boxes (footprint plus
height); projection yields axis-aligned pixel rectangles.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Pose2D, obb_corners, rot90ccw

NEAR_PLANE = 0.1


@dataclass(frozen=True)
class CameraRig:
    fov_deg: float = 60.0
    width: int = 1920
    height: int = 1080
    mount_height_m: float = 1.6
    forward_offset_m: float = 1.0

    @property
    def focal_px(self) -> float:
        return (self.width / 2.0) / math.tan(math.radians(self.fov_deg) / 2.0)


GENERATION_CAMERA = CameraRig()
DRIVE_CAMERA = CameraRig(width=1600, height=900)


@dataclass
class BBox2D:
    """Projected pixel rectangle, clamped to the image.

    Bounds are integer pixels, half-open: the covered pixels are
    [x0, x1) x [y0, y1).  label is assigned during label placement and is
    -1 before that.
    """

    track_id: str
    x0: int
    y0: int
    x1: int
    y1: int
    depth: float
    label: int = -1

    @property
    def area_px(self) -> int:
        return max(0, self.x1 - self.x0) * max(0, self.y1 - self.y0)

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0)

    def rect(self) -> tuple[int, int, int, int]:
        return (self.x0, self.y0, self.x1, self.y1)


def camera_pose(camera: CameraRig, ego: Pose2D) -> Pose2D:
    return Pose2D(ego.position + camera.forward_offset_m * ego.heading, ego.heading)


def _camera_coords(camera: CameraRig, ego: Pose2D, points_xy: np.ndarray, z: np.ndarray):
    """World (x, y, z-up) -> (right, depth, up-offset) camera coordinates."""
    cam = camera_pose(camera, ego)
    d = points_xy - cam.position
    depth = d @ cam.heading
    right = d @ (-rot90ccw(cam.heading))
    up = z - camera.mount_height_m
    return right, depth, up


def _to_pixels(camera: CameraRig, right, depth, up):
    f = camera.focal_px
    u = camera.width / 2.0 + f * right / depth
    v = camera.height / 2.0 - f * up / depth
    return u, v


def project_box(
    camera: CameraRig,
    ego: Pose2D,
    center: np.ndarray,
    heading: np.ndarray,
    half_extents: np.ndarray,
    height: float,
    track_id: str = "",
) -> BBox2D | None:
    """Project an extruded oriented box to its enclosing pixel rectangle.

    Returns None when every corner is behind the image plane or the
    rectangle falls entirely outside the viewport.
    """
    footprint = obb_corners(center, heading, half_extents)
    corners = np.vstack([footprint, footprint])
    z = np.array([0.0] * 4 + [float(height)] * 4)
    right, depth, up = _camera_coords(camera, ego, corners, z)
    in_front = depth > NEAR_PLANE
    if not np.any(in_front):
        return None
    u, v = _to_pixels(camera, right[in_front], depth[in_front], up[in_front])
    x0 = int(math.floor(u.min()))
    x1 = int(math.ceil(u.max()))
    y0 = int(math.floor(v.min()))
    y1 = int(math.ceil(v.max()))
    x0, x1 = max(0, x0), min(camera.width, x1)
    y0, y1 = max(0, y0), min(camera.height, y1)
    if x0 >= x1 or y0 >= y1:
        return None
    center_depth = float(
        np.dot(np.asarray(center, dtype=float) - camera_pose(camera, ego).position, ego.heading)
    )
    return BBox2D(track_id, x0, y0, x1, y1, center_depth)


def project_ground_polygon(
    camera: CameraRig, ego: Pose2D, polygon: np.ndarray
) -> np.ndarray | None:
    """Project a ground-plane polygon, clipping it against the near plane.

    Returns an (n, 2) pixel array or None when nothing is in front of the
    camera.
    """
    cam = camera_pose(camera, ego)
    d = np.asarray(polygon, dtype=float) - cam.position
    depth = d @ cam.heading
    right = d @ (-rot90ccw(cam.heading))

    # Sutherland-Hodgman clip of the (right, depth) polygon on depth >= NEAR_PLANE.
    pts = list(zip(right, depth))
    clipped: list[tuple[float, float]] = []
    n = len(pts)
    for i in range(n):
        cur = pts[i]
        nxt = pts[(i + 1) % n]
        cur_in = cur[1] >= NEAR_PLANE
        nxt_in = nxt[1] >= NEAR_PLANE
        if cur_in:
            clipped.append(cur)
        if cur_in != nxt_in:
            t = (NEAR_PLANE - cur[1]) / (nxt[1] - cur[1])
            clipped.append((cur[0] + t * (nxt[0] - cur[0]), NEAR_PLANE))
    if len(clipped) < 3:
        return None
    arr = np.array(clipped)
    u, v = _to_pixels(camera, arr[:, 0], arr[:, 1], np.full(len(arr), -camera.mount_height_m))
    return np.column_stack([u, v])
