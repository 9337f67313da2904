"""Deterministic synthetic environment for teaching, repeating, and metrics.

A World is a set of 3D landmarks whose descriptors are derived from their
ids through a seeded RNG, so two renders of the same scene produce features
that match exactly under mutual-NN at zero noise. Rendering projects the
landmarks through the pinhole model and optionally degrades the result
(pixel jitter, descriptor noise, dropout, distractor features) to emulate
lighting change between the teach and repeat runs.

Noise draw order per rendered frame is part of the determinism contract:
1) dropout uniforms over visible landmarks, 2) pixel offsets (n, 2),
3) descriptor offsets (n, D), 4) distractor pixel positions, descriptors,
scores. Zero-noise renders consume no random numbers.

Also provided: unicycle / UAV kinematics, odometry models (scaled ground
odometry and command-integrated UAV odometry), and the 9-view shift-
evaluation dataset generator (3 lateral offsets x 3 yaw offsets per
position) with its on-disk manifest format.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .control import Platform, VelocityCommand
from .features import (DEFAULT_GLOBAL_DIM, DEFAULT_LOCAL_DIM, FeatureSet,
                       global_descriptor_from_locals, unit_normalize,
                       write_feature_file)
from .geometry import CameraModel, Pose, project_many, wrap_angle

DATASET_FORMAT = "repeatnav-shift-dataset"
DATASET_VERSION = 1
DATASET_MANIFEST_NAME = "dataset.json"

DEFAULT_LATERAL_OFFSETS_M = (-0.36, 0.0, 0.36)
DEFAULT_YAW_OFFSETS_RAD = (-math.radians(15.0), 0.0, math.radians(15.0))


@dataclass(frozen=True)
class Landmark:
    """A world point with an id-derived descriptor and detection score."""

    id: int
    position: np.ndarray
    descriptor: np.ndarray
    base_score: float


def landmark_appearance(world_seed: int, landmark_id: int,
                        descriptor_dim: int) -> tuple[np.ndarray, float]:
    """Descriptor (unit-norm float32) and score derived from (seed, id).

    Draw order: standard normal descriptor, then the score uniform in
    (0.5, 1.0]. Identical inputs give identical outputs across runs.
    """
    rng = np.random.default_rng([world_seed, landmark_id])
    descriptor = unit_normalize(rng.standard_normal(descriptor_dim))
    score = 1.0 - 0.5 * rng.random()
    return descriptor, score


class World:
    """Immutable landmark field with precomputed descriptor arrays."""

    def __init__(self, positions: np.ndarray, seed: int,
                 descriptor_dim: int = DEFAULT_LOCAL_DIM):
        self.seed = seed
        self.descriptor_dim = descriptor_dim
        self.positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
        self.positions.setflags(write=False)
        n = len(self.positions)
        descriptors = np.empty((n, descriptor_dim), dtype=np.float32)
        scores = np.empty(n, dtype=np.float32)
        for i in range(n):
            descriptors[i], scores[i] = landmark_appearance(seed, i,
                                                            descriptor_dim)
        self.descriptors = descriptors
        self.scores = scores
        self.descriptors.setflags(write=False)
        self.scores.setflags(write=False)

    def __len__(self) -> int:
        return len(self.positions)

    @property
    def landmarks(self) -> list[Landmark]:
        return [Landmark(i, self.positions[i], self.descriptors[i],
                         float(self.scores[i])) for i in range(len(self))]

    @classmethod
    def open_field(cls, seed: int, landmark_count: int = 400,
                   x_range: tuple[float, float] = (-20.0, 20.0),
                   y_range: tuple[float, float] = (-20.0, 20.0),
                   z_range: tuple[float, float] = (0.0, 3.0),
                   descriptor_dim: int = DEFAULT_LOCAL_DIM) -> "World":
        """Landmarks uniform in a box; generic outdoor-like scene."""
        rng = np.random.default_rng(seed)
        low = [x_range[0], y_range[0], z_range[0]]
        high = [x_range[1], y_range[1], z_range[1]]
        positions = rng.uniform(low, high, size=(landmark_count, 3))
        return cls(positions, seed=seed, descriptor_dim=descriptor_dim)

    @classmethod
    def corridor(cls, seed: int, length: float = 40.0, half_width: float = 4.0,
                 spacing: float = 1.0, heights: tuple[float, ...] = (0.0, 1.0, 2.0, 3.0),
                 descriptor_dim: int = DEFAULT_LOCAL_DIM) -> "World":
        """Two parallel walls of grid landmarks along +x; indoor-like scene."""
        xs = np.arange(0.0, length + 1e-9, spacing)
        points = []
        for side in (-half_width, half_width):
            for x in xs:
                for z in heights:
                    points.append((x, side, z))
        return cls(np.asarray(points), seed=seed, descriptor_dim=descriptor_dim)


@dataclass(frozen=True)
class NoiseModel:
    """Rendering and odometry degradation; all zeros means ideal sensing."""

    pixel_sigma: float = 0.0
    descriptor_sigma: float = 0.0
    dropout_prob: float = 0.0
    distractor_count: int = 0
    odom_scale_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.dropout_prob < 1.0:
            raise ValueError("dropout_prob must be in [0, 1)")
        if min(self.pixel_sigma, self.descriptor_sigma,
               self.odom_scale_sigma) < 0 or self.distractor_count < 0:
            raise ValueError("noise magnitudes must be nonnegative")

    @classmethod
    def night(cls, seed: int = 0) -> "NoiseModel":
        """Lighting-degradation preset: dropout, descriptor noise, jitter."""
        return cls(pixel_sigma=1.0, descriptor_sigma=0.05, dropout_prob=0.3,
                   seed=seed)

    @property
    def is_ideal(self) -> bool:
        return (self.pixel_sigma == 0 and self.descriptor_sigma == 0
                and self.dropout_prob == 0 and self.distractor_count == 0)


def _clip_to_image(positions: np.ndarray, camera: CameraModel) -> np.ndarray:
    """Clamp float32 pixel positions into [0, size) despite rounding."""
    w, h = camera.image_size
    out = positions.astype(np.float32)
    limit = np.nextafter(np.array([w, h], dtype=np.float32), np.float32(0.0))
    return np.clip(out, np.float32(0.0), limit)


def render_features(world: World, camera_pose: Pose, camera: CameraModel,
                    noise: NoiseModel | None = None,
                    rng: np.random.Generator | None = None) -> FeatureSet:
    """Project the world into a FeatureSet as seen from camera_pose.

    Landmarks appear in id order; distractors are appended last. An empty
    view is returned as an empty FeatureSet, not an error. Pass a shared
    rng to chain multiple renders into one deterministic stream.
    """
    noise = noise or NoiseModel()
    if rng is None:
        rng = np.random.default_rng(noise.seed)

    pixels, visible = project_many(camera, camera_pose, world.positions)
    idx = np.nonzero(visible)[0]
    positions = pixels[idx]
    if noise.dropout_prob > 0 and len(idx):
        keep = rng.random(len(idx)) >= noise.dropout_prob
        idx = idx[keep]
        positions = positions[keep]
    descriptors = world.descriptors[idx].astype(np.float64)
    scores = world.scores[idx].astype(np.float32)

    if noise.pixel_sigma > 0 and len(idx):
        positions = positions + noise.pixel_sigma * rng.standard_normal(
            positions.shape)
    if noise.descriptor_sigma > 0 and len(idx):
        descriptors = descriptors + noise.descriptor_sigma * rng.standard_normal(
            descriptors.shape)
    if len(idx):
        descriptors = descriptors / np.linalg.norm(descriptors, axis=1,
                                                   keepdims=True)

    if noise.distractor_count > 0:
        m = noise.distractor_count
        w, h = camera.image_size
        extra_pos = rng.random((m, 2)) * np.array([w, h], dtype=np.float64)
        extra_desc = rng.standard_normal((m, world.descriptor_dim))
        extra_desc = extra_desc / np.linalg.norm(extra_desc, axis=1,
                                                 keepdims=True)
        extra_scores = rng.random(m).astype(np.float32)
        positions = np.concatenate([positions.reshape(-1, 2), extra_pos])
        descriptors = np.concatenate([descriptors.reshape(-1, world.descriptor_dim),
                                      extra_desc])
        scores = np.concatenate([scores, extra_scores])

    if len(positions) == 0:
        return FeatureSet.empty(camera.image_size, world.descriptor_dim,
                                DEFAULT_GLOBAL_DIM)
    descriptors32 = descriptors.astype(np.float32)
    return FeatureSet(
        image_size=camera.image_size,
        positions=_clip_to_image(np.asarray(positions), camera),
        scores=np.asarray(scores, dtype=np.float32),
        descriptors=descriptors32,
        global_descriptor=global_descriptor_from_locals(descriptors32))


@dataclass(frozen=True)
class RobotState:
    """True pose plus platform; ground robots keep a fixed height."""

    pose: Pose
    platform: Platform = Platform.GROUND


def step_kinematics(state: RobotState, cmd: VelocityCommand,
                    dt: float) -> RobotState:
    """Forward-Euler unicycle step; UAVs also integrate vertical speed.

    Position uses the pre-step yaw, so commanding a constant-rate full
    circle in N substeps returns exactly to the start (the discrete sum of
    a full period of headings cancels).
    """
    pose = state.pose
    x, y, z = pose.position
    x += cmd.forward * math.cos(pose.yaw) * dt
    y += cmd.forward * math.sin(pose.yaw) * dt
    if state.platform is Platform.UAV:
        z += cmd.vertical * dt
    yaw = wrap_angle(pose.yaw + cmd.yaw_rate * dt)
    return RobotState(pose=Pose(position=np.array([x, y, z]), yaw=yaw),
                      platform=state.platform)


def read_odometry(true_distance: float, odom_scale_sigma: float,
                  rng: np.random.Generator) -> float:
    """Ground odometry: the true distance under a multiplicative scale error."""
    if odom_scale_sigma <= 0:
        return true_distance
    return true_distance * (1.0 + rng.normal(0.0, odom_scale_sigma))


class GroundOdometer:
    """Integrates true motion increments with per-reading scale noise."""

    def __init__(self, noise: NoiseModel, rng: np.random.Generator):
        self._sigma = noise.odom_scale_sigma
        self._rng = rng
        self.distance = 0.0

    def record_motion(self, true_delta: float) -> float:
        measured = read_odometry(true_delta, self._sigma, self._rng)
        self.distance += measured
        return measured


class CommandOdometer:
    """UAV odometry: distance integrated from commanded, not true, motion."""

    def __init__(self):
        self.distance = 0.0

    def record_command(self, cmd: VelocityCommand, dt: float) -> float:
        measured = cmd.forward * dt
        self.distance += measured
        return measured


@dataclass(frozen=True)
class DatasetView:
    lateral_m: float
    yaw_rad: float
    features: FeatureSet

    @property
    def is_reference(self) -> bool:
        return self.lateral_m == 0.0 and self.yaw_rad == 0.0


@dataclass(frozen=True)
class DatasetPosition:
    index: int
    pose: Pose
    views: tuple[DatasetView, ...]

    @property
    def reference(self) -> DatasetView:
        for view in self.views:
            if view.is_reference:
                return view
        raise ValueError("position has no center reference view")


@dataclass(frozen=True)
class ShiftDataset:
    """P positions x 9 views with exactly known lateral/yaw transformations."""

    camera: CameraModel
    lateral_offsets: tuple[float, ...]
    yaw_offsets: tuple[float, ...]
    positions: tuple[DatasetPosition, ...]

    @property
    def view_count(self) -> int:
        return sum(len(p.views) for p in self.positions)


def offset_pose(base: Pose, lateral_m: float, yaw_rad: float) -> Pose:
    """Camera pose displaced sideways (positive = left) and yawed in place."""
    return Pose(position=base.position + lateral_m * base.left,
                yaw=wrap_angle(base.yaw + yaw_rad))


def generate_shift_dataset(world: World, poses: list[Pose], camera: CameraModel,
                           lateral_offsets: tuple[float, ...] = DEFAULT_LATERAL_OFFSETS_M,
                           yaw_offsets: tuple[float, ...] = DEFAULT_YAW_OFFSETS_RAD,
                           noise: NoiseModel | None = None,
                           rng: np.random.Generator | None = None) -> ShiftDataset:
    """Render the 9-view grid (laterals outer, yaws inner) at every pose.

    One rng stream is threaded through all renders in order, so the whole
    dataset is reproducible from the noise seed alone.
    """
    noise = noise or NoiseModel()
    if rng is None:
        rng = np.random.default_rng(noise.seed)
    positions = []
    for i, base in enumerate(poses):
        views = []
        for lateral in lateral_offsets:
            for yaw in yaw_offsets:
                feats = render_features(world, offset_pose(base, lateral, yaw),
                                        camera, noise, rng)
                views.append(DatasetView(lateral_m=lateral, yaw_rad=yaw,
                                         features=feats))
        positions.append(DatasetPosition(index=i, pose=base,
                                         views=tuple(views)))
    return ShiftDataset(camera=camera, lateral_offsets=tuple(lateral_offsets),
                        yaw_offsets=tuple(yaw_offsets),
                        positions=tuple(positions))


def save_dataset(dataset: ShiftDataset, destination: str | Path) -> Path:
    """Write dataset.json plus one feature file per view; returns manifest path."""
    dest = Path(destination)
    dest.mkdir(parents=True, exist_ok=True)
    camera = dataset.camera
    positions_json = []
    for pos in dataset.positions:
        views_json = []
        for v, view in enumerate(pos.views):
            name = f"pos_{pos.index:04d}_view_{v}.trfv"
            write_feature_file(dest / name, view.features)
            views_json.append({"lateral_m": view.lateral_m,
                               "yaw_rad": view.yaw_rad,
                               "features": name})
        positions_json.append({
            "index": pos.index,
            "pose": {"position": [float(c) for c in pos.pose.position],
                     "yaw": pos.pose.yaw},
            "views": views_json,
        })
    manifest = {
        "format": DATASET_FORMAT,
        "version": DATASET_VERSION,
        "camera": {
            "focal_length_px": camera.focal_length_px,
            "principal_point": list(camera.principal_point),
            "image_size": list(camera.image_size),
            "near_plane_m": camera.near_plane_m,
        },
        "lateral_offsets_m": list(dataset.lateral_offsets),
        "yaw_offsets_rad": list(dataset.yaw_offsets),
        "positions": positions_json,
    }
    manifest_path = dest / DATASET_MANIFEST_NAME
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest_path
