"""Writers for the on-disk formats shared with the repeatnav package.

The bridge never imports repeatnav; these writers re-implement its formats
from the layout contract so the two packages stay independent and the
formats themselves remain the only coupling.

Binary feature file (little-endian throughout):

    magic "TRFV" | version u16 | flags u16 | image_w u32 | image_h u32 |
    feature_count u32 | local_dim u16 | global_dim u16 |
    global descriptor (global_dim x f32) |
    per feature: u f32, v f32, score f32, descriptor (local_dim x f32)

Map manifest (manifest.json): format "repeatnav-map" version 1 holding
camera intrinsics, capture and histogram config echoes, total_length, and
a keyframe table of (index, arc_length, speed, curvature, stored_shift,
features file name). Floats are decimal JSON; feature payloads live in the
binary files.

Dataset manifest (dataset.json): format "repeatnav-shift-dataset" version 1
holding camera intrinsics, the lateral/yaw offset grids, and per-position
view lists (lateral_m, yaw_rad, features file name). Bridge exports add an
"image" path to every view entry so real-image datasets stay traceable to
their sources.
"""

from __future__ import annotations

import json
import math
import struct
from pathlib import Path

import numpy as np

MAGIC = b"TRFV"
FEATURE_FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHHIIIHH")

DEFAULT_GLOBAL_DIM = 256

MAP_FORMAT = "repeatnav-map"
MAP_VERSION = 1
MAP_MANIFEST_NAME = "manifest.json"

DATASET_FORMAT = "repeatnav-shift-dataset"
DATASET_VERSION = 1
DATASET_MANIFEST_NAME = "dataset.json"

DEFAULT_NEAR_PLANE_M = 0.05
DEFAULT_HEADING_THRESHOLD_RAD = math.radians(10.0)
DEFAULT_HISTOGRAM_CONFIG = {
    "bin_size_px": 4,
    "gaussian_sigma_bins": 2.0,
    "gaussian_truncate_bins": 6,
}


def pooled_global_descriptor(descriptors: np.ndarray,
                             global_dim: int = DEFAULT_GLOBAL_DIM) -> np.ndarray:
    """Mean-pool local descriptors into a unit-norm global descriptor.

    The mean is truncated or zero-padded to global_dim before normalizing,
    matching the navigation package's pooling so both components rank
    images identically. An empty input pools to the all-zero vector (the
    format's encoding of "no content").
    """
    desc = np.asarray(descriptors, dtype=np.float64)
    if desc.ndim == 1:
        desc = desc.reshape(1, len(desc))
    pooled = np.zeros(global_dim)
    if desc.size == 0:
        return pooled.astype(np.float32)
    mean = desc.mean(axis=0)
    span = min(global_dim, len(mean))
    pooled[:span] = mean[:span]
    norm = np.linalg.norm(pooled)
    if norm == 0.0:
        return pooled.astype(np.float32)
    return (pooled / norm).astype(np.float32)


def write_feature_file(path: str | Path, image_size: tuple[int, int],
                       positions: np.ndarray, scores: np.ndarray,
                       descriptors: np.ndarray, global_descriptor: np.ndarray,
                       flags: int = 0) -> None:
    """Serialize one image's features to the binary feature-file format."""
    positions = np.asarray(positions, dtype=np.float32).reshape(-1, 2)
    scores = np.asarray(scores, dtype=np.float32).reshape(-1)
    n = len(positions)
    descriptors = np.asarray(descriptors, dtype=np.float32)
    if descriptors.ndim != 2:
        descriptors = descriptors.reshape(n, -1) if n else descriptors.reshape(0, 0)
    global_descriptor = np.asarray(global_descriptor, dtype=np.float32).reshape(-1)
    local_dim = descriptors.shape[1]

    header = _HEADER.pack(MAGIC, FEATURE_FORMAT_VERSION, flags,
                          int(image_size[0]), int(image_size[1]),
                          n, local_dim, len(global_descriptor))
    per_feature = np.empty((n, 3 + local_dim), dtype="<f4")
    per_feature[:, 0:2] = positions
    per_feature[:, 2] = scores
    per_feature[:, 3:] = descriptors
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(global_descriptor.astype("<f4").tobytes())
        fh.write(per_feature.tobytes())


def camera_json(focal_length_px: float, image_size: tuple[int, int]) -> dict:
    """Intrinsics block with the principal point at the image center."""
    w, h = int(image_size[0]), int(image_size[1])
    return {
        "focal_length_px": float(focal_length_px),
        "principal_point": [w / 2.0, h / 2.0],
        "image_size": [w, h],
        "near_plane_m": DEFAULT_NEAR_PLANE_M,
    }


def map_manifest(camera: dict, keyframes: list[dict], total_length: float,
                 spacing_m: float) -> dict:
    """Map manifest for a sequence of images spaced by a nominal arc length.

    The capture block records the synthetic spacing used for the arc
    lengths (no real capture trigger ran); the histogram block echoes the
    navigation package's defaults so downstream shift computations have a
    complete config.
    """
    return {
        "format": MAP_FORMAT,
        "version": MAP_VERSION,
        "total_length": total_length,
        "camera": camera,
        "capture_config": {
            "d_straight": spacing_m,
            "d_turn": 0.3 * spacing_m,
            "heading_threshold": DEFAULT_HEADING_THRESHOLD_RAD,
            "store_shifts": False,
        },
        "histogram_config": dict(DEFAULT_HISTOGRAM_CONFIG),
        "keyframes": keyframes,
    }


def dataset_manifest(camera: dict, lateral_offsets_m: tuple[float, ...],
                     yaw_offsets_rad: tuple[float, ...],
                     positions: list[dict]) -> dict:
    return {
        "format": DATASET_FORMAT,
        "version": DATASET_VERSION,
        "camera": camera,
        "lateral_offsets_m": list(lateral_offsets_m),
        "yaw_offsets_rad": list(yaw_offsets_rad),
        "positions": positions,
    }


def write_json(path: str | Path, payload: dict) -> Path:
    """Stable JSON serialization: sorted keys, two-space indent, newline."""
    path = Path(path)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path
