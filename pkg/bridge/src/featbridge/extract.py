"""Batch extraction: a directory of images in, feature files plus manifest out.

Two input layouts are supported. "sequence" (the default) treats the
images, sorted by file name, as consecutive keyframes of a taught path and
writes a loadable map directory: manifest.json plus one feature file per
image, with arc lengths spaced by a nominal per-image distance. "9view"
expects file stems `pos_<P>_view_<V>` with V in 0..8 enumerating a 3x3
lateral-by-yaw grid (laterals outer, yaws inner, view 4 the untransformed
reference) and writes a shift-evaluation dataset: dataset.json plus one
feature file per view, each view entry carrying the path of its source
image.

Every run also writes extract_report.json recording the settings, the
per-image feature counts, and any per-image errors. Unreadable images are
skipped with a logged error and flagged through ExtractReport.errors (the
CLI exits nonzero); all remaining images are still processed. Outputs are
byte-deterministic for identical inputs and settings.
"""

from __future__ import annotations

import math
import os
import re
from dataclasses import dataclass, field
from pathlib import Path

from . import formats
from .detector import DetectorConfig, resolve_detector
from .errors import ExtractionError, ImageReadError
from .image_io import is_image_file, load_grayscale

REPORT_NAME = "extract_report.json"
VIEWS_PER_POSITION = 9
_VIEW_STEM = re.compile(r"^pos_(\d+)_view_(\d+)$")

LAYOUTS = ("sequence", "9view")


@dataclass(frozen=True)
class ExtractConfig:
    """Extraction settings; the manifest geometry fields are documentation
    for downstream consumers, not measurements (real imagery carries no
    calibrated pose)."""

    resize_px: int = 336
    model: str = "dog"
    layout: str = "sequence"
    focal_length_px: float = 400.0
    spacing_m: float = 1.0
    taught_speed_m_s: float = 0.5
    lateral_step_m: float = 0.36
    yaw_step_deg: float = 15.0
    detector: DetectorConfig = field(default_factory=DetectorConfig)

    def __post_init__(self):
        if self.resize_px < 16:
            raise ExtractionError("resize_px must be >= 16")
        if self.layout not in LAYOUTS:
            raise ExtractionError(f"layout must be one of {LAYOUTS}, got {self.layout!r}")
        if self.focal_length_px <= 0.0:
            raise ExtractionError("focal_length_px must be positive")
        if self.spacing_m <= 0.0:
            raise ExtractionError("spacing_m must be positive")
        if self.taught_speed_m_s <= 0.0:
            raise ExtractionError("taught_speed_m_s must be positive")
        if self.lateral_step_m <= 0.0:
            raise ExtractionError("lateral_step_m must be positive")
        if self.yaw_step_deg <= 0.0:
            raise ExtractionError("yaw_step_deg must be positive")


@dataclass(frozen=True)
class ImageResult:
    """One successfully extracted image."""

    image: str
    feature_file: str
    feature_count: int


@dataclass(frozen=True)
class ExtractReport:
    """Outcome of one extraction run."""

    records: tuple[ImageResult, ...]
    errors: tuple[str, ...]
    manifest_path: Path

    @property
    def complete(self) -> bool:
        return not self.errors


def _list_images(input_dir: Path) -> list[Path]:
    if not input_dir.is_dir():
        raise ExtractionError(f"input {input_dir} is not a directory")
    return sorted(p for p in input_dir.iterdir() if is_image_file(p))


def _extract_one(path: Path, detector, config: ExtractConfig):
    """Image file to feature-file payload; ImageReadError passes through."""
    image = load_grayscale(path, config.resize_px)
    positions, scores, descriptors = detector(image)
    global_descriptor = formats.pooled_global_descriptor(descriptors)
    return positions, scores, descriptors, global_descriptor


def _write_report(out_dir: Path, config: ExtractConfig,
                  records: list[ImageResult], errors: list[str]) -> None:
    payload = {
        "layout": config.layout,
        "model": config.model,
        "resize_px": config.resize_px,
        "images": [{"image": r.image, "features": r.feature_file,
                    "feature_count": r.feature_count} for r in records],
        "errors": list(errors),
    }
    formats.write_json(out_dir / REPORT_NAME, payload)


def _extract_sequence(images: list[Path], out_dir: Path,
                      config: ExtractConfig, detector) -> ExtractReport:
    records: list[ImageResult] = []
    errors: list[str] = []
    keyframes: list[dict] = []
    seen: set[str] = set()
    for path in images:
        name = path.stem + ".trfv"
        if name in seen:
            errors.append(f"{path.name}: feature file name {name} already taken")
            continue
        try:
            positions, scores, descriptors, global_desc = _extract_one(
                path, detector, config)
        except ImageReadError as exc:
            errors.append(str(exc))
            continue
        seen.add(name)
        formats.write_feature_file(out_dir / name,
                                   (config.resize_px, config.resize_px),
                                   positions, scores, descriptors, global_desc)
        index = len(records)
        keyframes.append({
            "index": index,
            "arc_length": index * config.spacing_m,
            "speed": config.taught_speed_m_s,
            "curvature": 0.0,
            "stored_shift": None,
            "features": name,
        })
        records.append(ImageResult(image=path.name, feature_file=name,
                                   feature_count=len(positions)))

    camera = formats.camera_json(config.focal_length_px,
                                 (config.resize_px, config.resize_px))
    total_length = max(0, len(keyframes) - 1) * config.spacing_m
    manifest = formats.map_manifest(camera, keyframes, total_length,
                                    config.spacing_m)
    manifest_path = formats.write_json(out_dir / formats.MAP_MANIFEST_NAME,
                                       manifest)
    _write_report(out_dir, config, records, errors)
    return ExtractReport(records=tuple(records), errors=tuple(errors),
                         manifest_path=manifest_path)


def _grid_offsets(config: ExtractConfig):
    lateral = config.lateral_step_m
    yaw = math.radians(config.yaw_step_deg)
    return (-lateral, 0.0, lateral), (-yaw, 0.0, yaw)


def _parse_view_stem(stem: str) -> tuple[int, int] | None:
    match = _VIEW_STEM.match(stem)
    if match is None:
        return None
    position, view = int(match.group(1)), int(match.group(2))
    if view >= VIEWS_PER_POSITION:
        return None
    return position, view


def _extract_nine_view(images: list[Path], out_dir: Path,
                       config: ExtractConfig, detector) -> ExtractReport:
    laterals, yaws = _grid_offsets(config)
    records: list[ImageResult] = []
    errors: list[str] = []
    views_by_position: dict[int, dict[int, dict]] = {}
    for path in images:
        parsed = _parse_view_stem(path.stem)
        if parsed is None:
            errors.append(
                f"{path.name}: expected stem pos_<P>_view_<V> with V in 0..8")
            continue
        position, view = parsed
        if view in views_by_position.get(position, {}):
            errors.append(f"{path.name}: duplicate of position {position} view {view}")
            continue
        try:
            positions, scores, descriptors, global_desc = _extract_one(
                path, detector, config)
        except ImageReadError as exc:
            errors.append(str(exc))
            continue
        name = f"pos_{position:04d}_view_{view}.trfv"
        formats.write_feature_file(out_dir / name,
                                   (config.resize_px, config.resize_px),
                                   positions, scores, descriptors, global_desc)
        views_by_position.setdefault(position, {})[view] = {
            "lateral_m": laterals[view // 3],
            "yaw_rad": yaws[view % 3],
            "features": name,
            "image": os.path.relpath(path.resolve(), out_dir.resolve()),
        }
        records.append(ImageResult(image=path.name, feature_file=name,
                                   feature_count=len(positions)))

    positions_json = []
    for position in sorted(views_by_position):
        by_view = views_by_position[position]
        positions_json.append({
            "index": position,
            "pose": {"position": [0.0, 0.0, 0.0], "yaw": 0.0},
            "views": [by_view[v] for v in sorted(by_view)],
        })

    camera = formats.camera_json(config.focal_length_px,
                                 (config.resize_px, config.resize_px))
    manifest = formats.dataset_manifest(camera, laterals, yaws, positions_json)
    manifest_path = formats.write_json(out_dir / formats.DATASET_MANIFEST_NAME,
                                       manifest)
    _write_report(out_dir, config, records, errors)
    return ExtractReport(records=tuple(records), errors=tuple(errors),
                         manifest_path=manifest_path)


def extract_directory(input_dir: str | Path, out_dir: str | Path,
                      config: ExtractConfig | None = None) -> ExtractReport:
    """Extract every image under input_dir into out_dir.

    Returns the report; report.complete is False when any image was
    skipped. The manifest kind follows config.layout.
    """
    config = config or ExtractConfig()
    detector = resolve_detector(config.model, config.detector)
    images = _list_images(Path(input_dir))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if config.layout == "9view":
        return _extract_nine_view(images, out, config, detector)
    return _extract_sequence(images, out, config, detector)
