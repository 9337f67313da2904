"""Shift-estimation evaluation over a 9-view dataset.

Each dataset position pairs a center forward-looking reference view (the
teach role) with 8 transformed query views (known lateral offset and yaw).
An estimate is correct when its horizontal shift falls inside the ground-
truth range spanned by two points on the reference camera axis - one at a
finite reference depth, one at infinity - widened by a tolerance on each
side. Spread is the per-transformation standard deviation of the
horizontal estimates across positions; overall numbers are unweighted
means over the 8 non-identity transformations.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import FeatureFileError, MapError
from .features import FeatureSet, read_feature_file
from .geometry import CameraModel
from .histogram import ShiftEstimate
from .sim import DATASET_FORMAT, DATASET_MANIFEST_NAME

ShiftEstimator = Callable[[FeatureSet, FeatureSet], ShiftEstimate]


@dataclass(frozen=True)
class MetricConfig:
    """Reference depth for the near ground-truth point and the pixel tolerance."""

    reference_depth: float = 5.0
    tolerance_px: float = 20.0

    def __post_init__(self):
        if self.reference_depth <= 0:
            raise ValueError("reference_depth must be positive")
        if self.tolerance_px < 0:
            raise ValueError("tolerance_px must be nonnegative")


def axis_point_shift(depth: float, lateral_m: float, yaw_rad: float,
                     focal_length_px: float) -> float:
    """Horizontal shift of the on-axis point at the given depth.

    Closed form of (reference pixel - query pixel) for a query camera
    displaced lateral_m to the left and yawed yaw_rad counterclockwise.
    """
    s, c = math.sin(yaw_rad), math.cos(yaw_rad)
    return -focal_length_px * (depth * s + lateral_m * c) / (depth * c - lateral_m * s)


def infinity_shift(yaw_rad: float, focal_length_px: float) -> float:
    """Horizontal shift of the point at infinity: pure-rotation shift."""
    return -focal_length_px * math.tan(yaw_rad)


def ground_truth_range(lateral_m: float, yaw_rad: float, camera: CameraModel,
                       config: MetricConfig | None = None) -> tuple[float, float]:
    """Correct-shift interval [min - tol, max + tol] from the two axis points."""
    config = config or MetricConfig()
    f = camera.focal_length_px
    near = axis_point_shift(config.reference_depth, lateral_m, yaw_rad, f)
    far = infinity_shift(yaw_rad, f)
    return (min(near, far) - config.tolerance_px,
            max(near, far) + config.tolerance_px)


@dataclass(frozen=True)
class TransformationResult:
    """Accuracy and spread for one (lateral, yaw) transformation."""

    lateral_m: float
    yaw_rad: float
    correct_fraction: float
    std_px: float
    mean_horizontal_px: float
    mean_vertical_px: float
    count: int

    @property
    def label(self) -> str:
        deg = math.degrees(self.yaw_rad)
        return f"lat{self.lateral_m:+.2f}m_yaw{deg:+.0f}deg"


@dataclass(frozen=True)
class MetricReport:
    """Per-transformation rows plus their unweighted averages."""

    transformations: tuple[TransformationResult, ...]
    overall_correct_fraction: float
    overall_std_px: float
    pair_count: int
    errors: tuple[str, ...] = field(default=())

    @property
    def complete(self) -> bool:
        return not self.errors

    def to_csv(self) -> str:
        lines = ["transformation,correct_fraction,std_px"]
        for row in self.transformations:
            lines.append(f"{row.label},{row.correct_fraction!r},{row.std_px!r}")
        lines.append(f"overall,{self.overall_correct_fraction!r},"
                     f"{self.overall_std_px!r}")
        return "\n".join(lines) + "\n"

    def to_table(self) -> str:
        header = (f"{'transformation':<22} {'correct':>8} {'std_px':>9} "
                  f"{'mean_h':>9} {'mean_v':>8} {'n':>4}")
        lines = [header, "-" * len(header)]
        for row in self.transformations:
            lines.append(f"{row.label:<22} {row.correct_fraction:>8.3f} "
                         f"{row.std_px:>9.2f} {row.mean_horizontal_px:>9.1f} "
                         f"{row.mean_vertical_px:>8.1f} {row.count:>4d}")
        lines.append("-" * len(header))
        lines.append(f"{'overall':<22} {self.overall_correct_fraction:>8.3f} "
                     f"{self.overall_std_px:>9.2f}")
        if self.errors:
            lines.append(f"errors: {len(self.errors)} item(s) skipped")
        return "\n".join(lines) + "\n"


def _load_manifest(dataset_dir: str | Path) -> tuple[dict, Path]:
    base = Path(dataset_dir)
    manifest_path = base if base.name == DATASET_MANIFEST_NAME else (
        base / DATASET_MANIFEST_NAME)
    if not manifest_path.is_file():
        raise MapError(f"no {DATASET_MANIFEST_NAME} found under {base}")
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("format") != DATASET_FORMAT:
        raise MapError(f"unknown dataset format {manifest.get('format')!r}")
    return manifest, manifest_path.parent


def camera_from_manifest(manifest: dict) -> CameraModel:
    cam = manifest["camera"]
    return CameraModel(focal_length_px=cam["focal_length_px"],
                       principal_point=tuple(cam["principal_point"]),
                       image_size=tuple(cam["image_size"]),
                       near_plane_m=cam["near_plane_m"])


def evaluate(dataset_dir: str | Path, estimator: ShiftEstimator,
             config: MetricConfig | None = None) -> MetricReport:
    """Score an estimator over every (reference, query) pair of a dataset.

    Pairs with missing or unreadable feature files are recorded in
    report.errors and excluded; callers signal partial evaluation through
    a nonzero exit status.
    """
    config = config or MetricConfig()
    manifest, base = _load_manifest(dataset_dir)
    camera = camera_from_manifest(manifest)

    estimates: dict[tuple[float, float], list[ShiftEstimate]] = {}
    errors: list[str] = []
    pair_count = 0
    for pos in manifest["positions"]:
        views = pos["views"]
        reference = None
        for view in views:
            if view["lateral_m"] == 0.0 and view["yaw_rad"] == 0.0:
                reference = view
                break
        if reference is None:
            errors.append(f"position {pos['index']}: no center reference view")
            continue
        try:
            reference_features = read_feature_file(base / reference["features"])
        except (OSError, FeatureFileError) as exc:
            errors.append(f"position {pos['index']} reference: {exc}")
            continue
        for view in views:
            key = (view["lateral_m"], view["yaw_rad"])
            if key == (0.0, 0.0):
                continue
            try:
                query_features = read_feature_file(base / view["features"])
            except (OSError, FeatureFileError) as exc:
                errors.append(f"position {pos['index']} view {key}: {exc}")
                continue
            estimates.setdefault(key, []).append(
                estimator(query_features, reference_features))
            pair_count += 1

    rows = []
    for (lateral, yaw), shift_list in estimates.items():
        lo, hi = ground_truth_range(lateral, yaw, camera, config)
        horizontal = np.asarray([s.horizontal_shift_px for s in shift_list])
        vertical = np.asarray([s.vertical_shift_px for s in shift_list])
        correct = np.mean((horizontal >= lo) & (horizontal <= hi))
        rows.append(TransformationResult(
            lateral_m=lateral, yaw_rad=yaw,
            correct_fraction=float(correct),
            std_px=float(np.std(horizontal)),
            mean_horizontal_px=float(np.mean(horizontal)),
            mean_vertical_px=float(np.mean(vertical)),
            count=len(shift_list)))

    if rows:
        overall_correct = float(np.mean([r.correct_fraction for r in rows]))
        overall_std = float(np.mean([r.std_px for r in rows]))
    else:
        overall_correct = 0.0
        overall_std = float("nan")
    return MetricReport(transformations=tuple(rows),
                        overall_correct_fraction=overall_correct,
                        overall_std_px=overall_std,
                        pair_count=pair_count,
                        errors=tuple(errors))
