"""Teaching phase: adaptive keyframe capture and the on-disk map format.

Keyframes are captured by driven distance, densified in turns: a frame is
emitted when distance since the last capture reaches d_straight, or when it
reaches d_turn with at least heading_threshold of accumulated heading
change. Each keyframe stores the feature set, arc length (odometry distance
at capture), the taught forward speed, a finite-difference curvature, and
optionally the image shift from the previous keyframe.

A map is a directory: manifest.json (metadata and config echo, floats in
decimal) plus one binary feature file per keyframe. The manifest always
echoes the histogram configuration so two maps differing only in the
store_shifts flag differ only in that flag and the stored shift values.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import MapError
from .features import FeatureSet, read_feature_file, write_feature_file
from .geometry import CameraModel, wrap_angle
from .histogram import HistogramConfig, estimate_shift

MAP_FORMAT = "repeatnav-map"
MAP_VERSION = 1
MANIFEST_NAME = "manifest.json"


@dataclass(frozen=True)
class CaptureConfig:
    """Adaptive keyframe trigger: sparse on straights, dense in turns."""

    d_straight: float = 1.0
    d_turn: float = 0.3
    heading_threshold: float = math.radians(10.0)
    store_shifts: bool = False

    def __post_init__(self):
        if not 0.0 < self.d_turn <= self.d_straight:
            raise ValueError("requires 0 < d_turn <= d_straight")
        if self.heading_threshold <= 0.0:
            raise ValueError("heading_threshold must be positive")


@dataclass(frozen=True)
class Keyframe:
    """One taught reference image with its arc-length position."""

    index: int
    arc_length: float
    features: FeatureSet
    taught_forward_speed: float
    taught_curvature: float
    stored_shift: tuple[float, float] | None = None


@dataclass(frozen=True)
class TaughtPath:
    """The taught database: keyframes ordered by strictly increasing arc length."""

    keyframes: tuple[Keyframe, ...]
    total_length: float
    camera: CameraModel
    capture_config: CaptureConfig
    histogram_config: HistogramConfig = field(default_factory=HistogramConfig)

    def __post_init__(self):
        if len(self.keyframes) < 2:
            raise MapError("a navigable path needs at least 2 keyframes")
        arcs = self.arc_lengths
        if not np.all(np.diff(arcs) > 0):
            raise MapError("keyframe arc lengths must be strictly increasing")
        if self.total_length < arcs[-1]:
            raise MapError("total_length must cover the last keyframe")
        if self.keyframes[0].stored_shift is not None:
            raise MapError("first keyframe cannot have a stored shift")

    @property
    def arc_lengths(self) -> np.ndarray:
        return np.asarray([k.arc_length for k in self.keyframes])

    @property
    def mean_spacing(self) -> float:
        return float(np.mean(np.diff(self.arc_lengths)))

    def __len__(self) -> int:
        return len(self.keyframes)

    def nearest_index(self, arc_length: float) -> int:
        """Keyframe closest in arc length; ties go to the earlier keyframe."""
        d = np.abs(self.arc_lengths - arc_length)
        return int(np.argmin(d))


class KeyframeRecorder:
    """Accumulates odometry between captures and applies the trigger rule.

    Feed monotone odometry via tick(); the first tick always captures.
    Single-session, single-threaded use.
    """

    def __init__(self, config: CaptureConfig | None = None):
        self.config = config or CaptureConfig()
        self.keyframes: list[Keyframe] = []
        self._last_arc: float | None = None
        self._last_yaw = 0.0
        self._heading_accum = 0.0
        self._distance_accum = 0.0

    @property
    def distance_since_capture(self) -> float:
        return self._distance_accum

    @property
    def heading_since_capture(self) -> float:
        return self._heading_accum

    def tick(self, arc_length: float, yaw: float, speed: float,
             features: FeatureSet) -> Keyframe | None:
        """Consider one odometry sample; returns the new keyframe if triggered."""
        if self._last_arc is not None:
            if arc_length < self._last_arc:
                raise ValueError("odometry must be monotone")
            self._distance_accum += arc_length - self._last_arc
            self._heading_accum += wrap_angle(yaw - self._last_yaw)
        self._last_arc = arc_length
        self._last_yaw = yaw

        first = not self.keyframes
        cfg = self.config
        triggered = (self._distance_accum >= cfg.d_straight
                     or (self._distance_accum >= cfg.d_turn
                         and abs(self._heading_accum) >= cfg.heading_threshold))
        if not (first or triggered):
            return None

        if first or self._distance_accum == 0.0:
            curvature = 0.0
        else:
            curvature = self._heading_accum / self._distance_accum
        keyframe = Keyframe(index=len(self.keyframes), arc_length=arc_length,
                            features=features, taught_forward_speed=speed,
                            taught_curvature=curvature)
        self.keyframes.append(keyframe)
        self._distance_accum = 0.0
        self._heading_accum = 0.0
        return keyframe


def finalize_map(keyframes: list[Keyframe], camera: CameraModel,
                 capture_config: CaptureConfig,
                 histogram_config: HistogramConfig | None = None,
                 total_length: float | None = None) -> TaughtPath:
    """Assemble the taught database, computing stored shifts when enabled.

    The stored shift of keyframe i is estimate_shift(previous, current):
    the displacement that maps the previous frame onto this one.
    """
    if len(keyframes) < 2:
        raise MapError("cannot finalize a map with fewer than 2 keyframes")
    histogram_config = histogram_config or HistogramConfig()
    if total_length is None:
        total_length = keyframes[-1].arc_length

    out: list[Keyframe] = []
    for i, kf in enumerate(keyframes):
        shift = None
        if capture_config.store_shifts and i > 0:
            est = estimate_shift(keyframes[i - 1].features, kf.features,
                                 histogram_config)
            shift = (est.horizontal_shift_px, est.vertical_shift_px)
        out.append(Keyframe(index=i, arc_length=kf.arc_length,
                            features=kf.features,
                            taught_forward_speed=kf.taught_forward_speed,
                            taught_curvature=kf.taught_curvature,
                            stored_shift=shift))
    return TaughtPath(keyframes=tuple(out), total_length=total_length,
                      camera=camera, capture_config=capture_config,
                      histogram_config=histogram_config)


def _feature_file_name(index: int) -> str:
    return f"keyframe_{index:05d}.trfv"


def _camera_to_json(camera: CameraModel) -> dict:
    return {
        "focal_length_px": camera.focal_length_px,
        "principal_point": list(camera.principal_point),
        "image_size": list(camera.image_size),
        "near_plane_m": camera.near_plane_m,
    }


def _camera_from_json(data: dict) -> CameraModel:
    return CameraModel(focal_length_px=data["focal_length_px"],
                       principal_point=tuple(data["principal_point"]),
                       image_size=tuple(data["image_size"]),
                       near_plane_m=data["near_plane_m"])


def save_map(path: TaughtPath, destination: str | Path) -> Path:
    """Write the map directory; returns the manifest path."""
    dest = Path(destination)
    dest.mkdir(parents=True, exist_ok=True)
    table = []
    for kf in path.keyframes:
        name = _feature_file_name(kf.index)
        write_feature_file(dest / name, kf.features)
        shift = None if kf.stored_shift is None else list(kf.stored_shift)
        table.append({
            "index": kf.index,
            "arc_length": kf.arc_length,
            "speed": kf.taught_forward_speed,
            "curvature": kf.taught_curvature,
            "stored_shift": shift,
            "features": name,
        })
    cc = path.capture_config
    hc = path.histogram_config
    manifest = {
        "format": MAP_FORMAT,
        "version": MAP_VERSION,
        "total_length": path.total_length,
        "camera": _camera_to_json(path.camera),
        "capture_config": {
            "d_straight": cc.d_straight,
            "d_turn": cc.d_turn,
            "heading_threshold": cc.heading_threshold,
            "store_shifts": cc.store_shifts,
        },
        "histogram_config": {
            "bin_size_px": hc.bin_size_px,
            "gaussian_sigma_bins": hc.gaussian_sigma_bins,
            "gaussian_truncate_bins": hc.gaussian_truncate_bins,
        },
        "keyframes": table,
    }
    manifest_path = dest / MANIFEST_NAME
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest_path


def load_map(source: str | Path) -> TaughtPath:
    """Load a map directory; rejects unknown formats and missing files."""
    src = Path(source)
    manifest_path = src if src.name == MANIFEST_NAME else src / MANIFEST_NAME
    if not manifest_path.is_file():
        raise MapError(f"no {MANIFEST_NAME} found under {src}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise MapError(f"manifest is not valid JSON: {exc}") from exc

    if manifest.get("format") != MAP_FORMAT:
        raise MapError(f"unknown map format {manifest.get('format')!r}")
    if manifest.get("version") != MAP_VERSION:
        raise MapError(f"unsupported map version {manifest.get('version')!r}")

    try:
        camera = _camera_from_json(manifest["camera"])
        cc_raw = manifest["capture_config"]
        capture_config = CaptureConfig(
            d_straight=cc_raw["d_straight"], d_turn=cc_raw["d_turn"],
            heading_threshold=cc_raw["heading_threshold"],
            store_shifts=cc_raw["store_shifts"])
        hc_raw = manifest["histogram_config"]
        histogram_config = HistogramConfig(
            bin_size_px=hc_raw["bin_size_px"],
            gaussian_sigma_bins=hc_raw["gaussian_sigma_bins"],
            gaussian_truncate_bins=hc_raw["gaussian_truncate_bins"])
        keyframes = []
        for row in manifest["keyframes"]:
            features = read_feature_file(manifest_path.parent / row["features"])
            shift = row["stored_shift"]
            keyframes.append(Keyframe(
                index=row["index"], arc_length=row["arc_length"],
                features=features, taught_forward_speed=row["speed"],
                taught_curvature=row["curvature"],
                stored_shift=None if shift is None else tuple(shift)))
        total_length = manifest["total_length"]
    except (KeyError, TypeError) as exc:
        raise MapError(f"manifest missing or malformed field: {exc}") from exc

    return TaughtPath(keyframes=tuple(keyframes), total_length=total_length,
                      camera=camera, capture_config=capture_config,
                      histogram_config=histogram_config)
