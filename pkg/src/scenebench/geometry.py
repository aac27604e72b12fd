"""Planar geometry primitives shared across the pipeline.

World frame is a right-handed x/y plane in meters.  Headings are unit
vectors, never angles; the ego frame has x pointing forward along the
heading and y pointing left.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

HEADING_NORM_TOL = 1e-9


class DegenerateBox(ValueError):
    """Raised when an oriented box has (near-)zero area."""


def vec2(x: float, y: float) -> np.ndarray:
    return np.array([float(x), float(y)])


def rot90ccw(v: np.ndarray) -> np.ndarray:
    """Rotate a 2-vector 90 degrees counterclockwise."""
    return np.array([-v[1], v[0]])


def unit(v: np.ndarray) -> np.ndarray:
    n = float(np.hypot(v[0], v[1]))
    if n == 0.0:
        raise ValueError("cannot normalize a zero vector")
    return np.array([v[0] / n, v[1] / n])


def rotate(v: np.ndarray, angle_rad: float) -> np.ndarray:
    c, s = np.cos(angle_rad), np.sin(angle_rad)
    return np.array([c * v[0] - s * v[1], s * v[0] + c * v[1]])


def signed_angle(a: np.ndarray, b: np.ndarray) -> float:
    """Signed angle in radians from vector a to vector b (ccw positive)."""
    return float(np.arctan2(a[0] * b[1] - a[1] * b[0], a[0] * b[0] + a[1] * b[1]))


@dataclass(frozen=True)
class Pose2D:
    """Position plus unit heading vector."""

    position: np.ndarray
    heading: np.ndarray

    def __post_init__(self) -> None:
        norm = float(np.hypot(self.heading[0], self.heading[1]))
        if abs(norm - 1.0) > 1e-6:
            raise ValueError(f"heading must be a unit vector, got norm {norm!r}")

    @property
    def left(self) -> np.ndarray:
        return rot90ccw(self.heading)


def to_ego_frame(ego: Pose2D, point: np.ndarray) -> np.ndarray:
    """World point -> ego frame (x forward, y left)."""
    d = point - ego.position
    return np.array([float(np.dot(d, ego.heading)), float(np.dot(d, ego.left))])


def from_ego_frame(ego: Pose2D, point: np.ndarray) -> np.ndarray:
    return ego.position + point[0] * ego.heading + point[1] * ego.left


def obb_corners(center: np.ndarray, heading: np.ndarray, half_extents: np.ndarray) -> np.ndarray:
    """Corners of an oriented box as a (4, 2) array.

    Order: front-left, front-right, rear-right, rear-left.
    """
    f = heading * half_extents[0]
    l = rot90ccw(heading) * half_extents[1]
    c = np.asarray(center, dtype=float)
    return np.array([c + f + l, c + f - l, c - f - l, c - f + l])


def check_box(corners: np.ndarray) -> np.ndarray:
    """Validate an oriented-box corner array, raising DegenerateBox if flat."""
    corners = np.asarray(corners, dtype=float)
    if corners.shape != (4, 2):
        raise DegenerateBox(f"expected 4 corners, got shape {corners.shape}")
    if abs(polygon_area(corners)) < 1e-12:
        raise DegenerateBox("box has zero area")
    return corners


def polygon_area(points: np.ndarray) -> float:
    """Signed shoelace area (ccw positive)."""
    x = points[:, 0]
    y = points[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def polyline_length(points: np.ndarray) -> float:
    points = np.asarray(points, dtype=float)
    if len(points) < 2:
        return 0.0
    return float(np.sum(np.hypot(*(np.diff(points, axis=0).T))))


def _orient(a, b, c) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _on_segment(a, b, p) -> bool:
    return (
        min(a[0], b[0]) - 1e-12 <= p[0] <= max(a[0], b[0]) + 1e-12
        and min(a[1], b[1]) - 1e-12 <= p[1] <= max(a[1], b[1]) + 1e-12
    )


def segments_intersect(a, b, c, d) -> bool:
    """True if closed segments ab and cd share at least one point."""
    o1 = _orient(a, b, c)
    o2 = _orient(a, b, d)
    o3 = _orient(c, d, a)
    o4 = _orient(c, d, b)
    if ((o1 > 0) != (o2 > 0) and o1 != 0 and o2 != 0) and (
        (o3 > 0) != (o4 > 0) and o3 != 0 and o4 != 0
    ):
        return True
    if o1 == 0 and _on_segment(a, b, c):
        return True
    if o2 == 0 and _on_segment(a, b, d):
        return True
    if o3 == 0 and _on_segment(c, d, a):
        return True
    if o4 == 0 and _on_segment(c, d, b):
        return True
    return False


def polygon_is_simple(points: np.ndarray) -> bool:
    """True if the closed polygon has no self-intersections.

    Adjacent edges may only share their common endpoint; non-adjacent
    edges may not touch at all.
    """
    n = len(points)
    if n < 3:
        return False
    edges = [(points[i], points[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        a, b = edges[i]
        if np.hypot(*(b - a)) < 1e-12:
            return False
        for j in range(i + 1, n):
            c, d = edges[j]
            adjacent = j == i + 1 or (i == 0 and j == n - 1)
            if adjacent:
                # The shared endpoint is allowed; any further contact is not.
                shared = b if j == i + 1 else a
                other_pair = (c, d) if j == i + 1 else (a, b)
                if _orient(a, b, c) == 0 and _orient(a, b, d) == 0:
                    # Collinear neighbours: reject if they overlap beyond the joint.
                    pts = [a, b, c, d]
                    axis = np.argmax(np.ptp(np.array(pts), axis=0))
                    lo1, hi1 = sorted((a[axis], b[axis]))
                    lo2, hi2 = sorted((c[axis], d[axis]))
                    if min(hi1, hi2) - max(lo1, lo2) > 1e-12:
                        return False
                continue
            if segments_intersect(a, b, c, d):
                return False
    return True


def point_in_polygon(point: np.ndarray, polygon: np.ndarray) -> bool:
    """Even-odd rule point-in-polygon test; boundary points count as inside."""
    x, y = float(point[0]), float(point[1])
    inside = False
    n = len(polygon)
    for i in range(n):
        x1, y1 = polygon[i]
        x2, y2 = polygon[(i + 1) % n]
        # Boundary check keeps the predicate stable for points on edges.
        if _orient((x1, y1), (x2, y2), (x, y)) == 0 and _on_segment((x1, y1), (x2, y2), (x, y)):
            return True
        if (y1 > y) != (y2 > y):
            x_cross = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if x_cross > x:
                inside = not inside
    return inside
