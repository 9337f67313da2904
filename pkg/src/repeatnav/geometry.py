"""Poses, pinhole camera model, and trajectory arc-length bookkeeping.

Coordinate conventions (fixed globally, used by every module):

  World frame (right-handed):
    - z-axis: up
    - yaw: rotation about world z, counter-clockwise positive seen from
      above; yaw 0 faces +x; normalized to (-pi, pi]
  Camera frame (standard computer vision):
    - +z: forward (optical axis), +x: right, +y: down
  Image frame:
    - u grows rightward, v grows downward, origin top-left
  Shift sign:
    - a pixel displacement is always reference - query; a query camera
      rotated by +yaw relative to the reference produces a horizontal
      shift of -f*tan(yaw)

All values are immutable after construction and safe for concurrent reads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

DEFAULT_NEAR_PLANE_M = 0.05


def wrap_angle(angle: float) -> float:
    """Normalize an angle to (-pi, pi]."""
    a = math.fmod(angle, 2.0 * math.pi)
    if a <= -math.pi:
        a += 2.0 * math.pi
    elif a > math.pi:
        a -= 2.0 * math.pi
    return a


def angle_difference(target: float, source: float) -> float:
    """Shortest signed angular difference target - source, in (-pi, pi]."""
    return wrap_angle(target - source)


@dataclass(frozen=True)
class Pose:
    """Position (meters) plus yaw (radians) about the world vertical axis.

    Ground-robot poses keep z fixed; UAV poses use all three coordinates.
    """

    position: np.ndarray
    yaw: float = 0.0

    def __post_init__(self):
        p = np.asarray(self.position, dtype=np.float64).reshape(3).copy()
        p.flags.writeable = False
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "yaw", wrap_angle(float(self.yaw)))

    @property
    def forward(self) -> np.ndarray:
        """Unit vector the pose faces, in the world xy-plane."""
        return np.array([math.cos(self.yaw), math.sin(self.yaw), 0.0])

    @property
    def left(self) -> np.ndarray:
        """Unit vector 90 degrees counter-clockwise from forward."""
        return np.array([-math.sin(self.yaw), math.cos(self.yaw), 0.0])

    def rotation_world_to_camera(self) -> np.ndarray:
        """3x3 matrix taking world-frame offsets into camera coordinates.

        Rows are the camera's right / down / forward axes expressed in the
        world frame, so that (x_c, y_c, z_c) = R @ (q - position).
        """
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        return np.array([
            [s, -c, 0.0],   # camera +x (right)
            [0.0, 0.0, -1.0],  # camera +y (down)
            [c, s, 0.0],    # camera +z (forward)
        ])


@dataclass(frozen=True)
class CameraModel:
    """Pinhole intrinsics: focal length, principal point, image size (px)."""

    focal_length_px: float
    principal_point: tuple[float, float]
    image_size: tuple[int, int]
    near_plane_m: float = DEFAULT_NEAR_PLANE_M

    def __post_init__(self):
        if self.focal_length_px <= 0:
            raise ValueError("focal_length_px must be positive")
        cx, cy = self.principal_point
        w, h = self.image_size
        if not (0 <= cx < w and 0 <= cy < h):
            raise ValueError("principal_point must lie inside image bounds")
        if self.near_plane_m <= 0:
            raise ValueError("near_plane_m must be positive")

    @property
    def horizontal_fov(self) -> float:
        w = self.image_size[0]
        return 2.0 * math.atan(0.5 * w / self.focal_length_px)

    @property
    def vertical_fov(self) -> float:
        h = self.image_size[1]
        return 2.0 * math.atan(0.5 * h / self.focal_length_px)


def project(camera: CameraModel, camera_pose: Pose, point,
            require_in_bounds: bool = True):
    """Project a world point through the pinhole model.

    Returns the pixel (u, v) as a float ndarray, or None when the point is
    behind the near plane or (with require_in_bounds) outside the image.
    """
    q = np.asarray(point, dtype=np.float64).reshape(3)
    rel = q - camera_pose.position
    cam = camera_pose.rotation_world_to_camera() @ rel
    if cam[2] <= camera.near_plane_m:
        return None
    cx, cy = camera.principal_point
    u = cx + camera.focal_length_px * cam[0] / cam[2]
    v = cy + camera.focal_length_px * cam[1] / cam[2]
    if require_in_bounds:
        w, h = camera.image_size
        if not (0.0 <= u < w and 0.0 <= v < h):
            return None
    return np.array([u, v])


def project_many(camera: CameraModel, camera_pose: Pose, points: np.ndarray,
                 require_in_bounds: bool = True):
    """Vectorized projection of an (n, 3) array of world points.

    Returns (pixels, mask): pixels is (n, 2); mask flags points that are in
    front of the near plane and, when requested, inside image bounds. Pixel
    rows where mask is False are undefined.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    rel = pts - camera_pose.position
    cam = rel @ camera_pose.rotation_world_to_camera().T
    z = cam[:, 2]
    mask = z > camera.near_plane_m
    safe_z = np.where(mask, z, 1.0)
    cx, cy = camera.principal_point
    u = cx + camera.focal_length_px * cam[:, 0] / safe_z
    v = cy + camera.focal_length_px * cam[:, 1] / safe_z
    if require_in_bounds:
        w, h = camera.image_size
        mask = mask & (u >= 0.0) & (u < w) & (v >= 0.0) & (v < h)
    return np.stack([u, v], axis=1), mask


def unproject(camera: CameraModel, camera_pose: Pose, pixel, depth: float) -> np.ndarray:
    """World point at the given camera depth along the ray through a pixel."""
    u, v = float(pixel[0]), float(pixel[1])
    cx, cy = camera.principal_point
    f = camera.focal_length_px
    ray_cam = np.array([(u - cx) / f, (v - cy) / f, 1.0]) * float(depth)
    # rotation matrices are orthonormal, so the transpose inverts them
    return camera_pose.rotation_world_to_camera().T @ ray_cam + camera_pose.position


@dataclass(frozen=True)
class ArcSample:
    """Interpolated pose at an arc-length query, flagging endpoint clamping."""

    pose: Pose
    clamped: bool
    segment_index: int


class PathGeometry:
    """Polyline of poses with cumulative arc-length bookkeeping."""

    def __init__(self, waypoints: list[Pose]):
        if len(waypoints) < 2:
            raise ValueError("a path needs at least two waypoints")
        self.waypoints = list(waypoints)
        positions = np.stack([wp.position for wp in waypoints])
        seg = np.linalg.norm(np.diff(positions, axis=0), axis=1)
        self.arc_lengths = np.concatenate([[0.0], np.cumsum(seg)])
        if np.any(seg < 0):
            raise ValueError("arc lengths must be nondecreasing")
        self._positions = positions

    @property
    def total_length(self) -> float:
        return float(self.arc_lengths[-1])

    def arc_position(self, s: float) -> ArcSample:
        """Pose linearly interpolated along the polyline at arc-length s.

        Yaw interpolates along the shortest angular difference. Out-of-range
        queries clamp to the nearest endpoint and set the clamped flag.
        """
        clamped = False
        if s < 0.0:
            s, clamped = 0.0, True
        elif s > self.total_length:
            s, clamped = self.total_length, True
        i = int(np.searchsorted(self.arc_lengths, s, side="right")) - 1
        i = min(max(i, 0), len(self.waypoints) - 2)
        s0, s1 = self.arc_lengths[i], self.arc_lengths[i + 1]
        t = 0.0 if s1 == s0 else (s - s0) / (s1 - s0)
        a, b = self.waypoints[i], self.waypoints[i + 1]
        pos = (1.0 - t) * a.position + t * b.position
        yaw = wrap_angle(a.yaw + t * angle_difference(b.yaw, a.yaw))
        return ArcSample(Pose(pos, yaw), clamped, i)

    def nearest_point(self, point) -> tuple[float, float]:
        """(xy distance, arc length) of the polyline point closest to an xy point."""
        p = np.asarray(point, dtype=np.float64)[:2]
        a = self._positions[:-1, :2]
        b = self._positions[1:, :2]
        ab = b - a
        denom = np.einsum("ij,ij->i", ab, ab)
        denom = np.where(denom == 0.0, 1.0, denom)
        t = np.clip(np.einsum("ij,ij->i", p - a, ab) / denom, 0.0, 1.0)
        closest = a + t[:, None] * ab
        distances = np.linalg.norm(closest - p, axis=1)
        i = int(np.argmin(distances))
        seg = self.arc_lengths[i + 1] - self.arc_lengths[i]
        return float(distances[i]), float(self.arc_lengths[i] + t[i] * seg)

    def nearest_point_distance(self, point) -> float:
        """Distance from an xy point to the polyline, ignoring z."""
        return self.nearest_point(point)[0]


def path_from_waypoints(points, yaws=None) -> PathGeometry:
    """Build a PathGeometry from raw coordinates.

    When yaws is omitted, each waypoint faces its outgoing segment (the last
    one keeps the preceding heading).
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.shape[1] == 2:
        pts = np.column_stack([pts, np.zeros(len(pts))])
    if yaws is None:
        deltas = np.diff(pts[:, :2], axis=0)
        seg_yaw = np.arctan2(deltas[:, 1], deltas[:, 0])
        yaws = np.append(seg_yaw, seg_yaw[-1])
    return PathGeometry([Pose(p, y) for p, y in zip(pts, yaws)])
