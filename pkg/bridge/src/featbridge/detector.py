"""Multi-scale blob keypoints with gradient-orientation patch descriptors.

The built-in detector finds strict local maxima of the absolute
difference-of-Gaussians response across a small scale stack, then describes
each keypoint with a grid of gradient-orientation histograms (4x4 cells x 8
bins = 128 dimensions by default) computed on the blurred image of the
detection level, L2-normalized with clipped re-normalization. Images are
assumed upright, so no orientation normalization is applied; an integer
translation of the input therefore translates interior keypoints exactly
and leaves their descriptors unchanged.

Everything is a pure function of the input pixels: no RNG, stable
tie-breaks (response desc, then row, column, scale level), float64 math
with a single final float32 cast. The same image always yields the same
features.

Detector plug-in contract: a detector is any callable taking one grayscale
float array (h, w) in [0, 1] and returning (positions, scores,
descriptors) with positions (n, 2) as (u, v) pixel coordinates inside the
image, scores (n,) nonnegative, and descriptors (n, d) unit-norm float32.
External detectors are addressed as "package.module:function".
"""

from __future__ import annotations

import importlib
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ExtractionError


@dataclass(frozen=True)
class DetectorConfig:
    """Scale stack, response gate, and descriptor grid parameters."""

    max_features: int = 500
    scale_count: int = 4
    base_sigma: float = 1.6
    scale_step: float = math.sqrt(2.0)
    response_floor: float = 1e-4
    descriptor_cells: int = 4
    orientation_bins: int = 8
    clip_fraction: float = 0.2

    def __post_init__(self):
        if self.max_features < 1:
            raise ExtractionError("max_features must be >= 1")
        if self.scale_count < 1:
            raise ExtractionError("scale_count must be >= 1")
        if self.base_sigma <= 0.0:
            raise ExtractionError("base_sigma must be positive")
        if self.scale_step <= 1.0:
            raise ExtractionError("scale_step must exceed 1")
        if self.response_floor <= 0.0:
            raise ExtractionError("response_floor must be positive")
        if self.descriptor_cells < 2 or self.descriptor_cells % 2:
            raise ExtractionError("descriptor_cells must be even and >= 2")
        if self.orientation_bins < 2:
            raise ExtractionError("orientation_bins must be >= 2")
        if not 0.0 < self.clip_fraction <= 1.0:
            raise ExtractionError("clip_fraction must be in (0, 1]")

    @property
    def descriptor_dim(self) -> int:
        return self.descriptor_cells ** 2 * self.orientation_bins

    def sigma_at(self, level: int) -> float:
        return self.base_sigma * self.scale_step ** level

    def cell_px_at(self, level: int) -> int:
        """Descriptor cell size grows with the detection scale."""
        return max(2, int(round(1.5 * self.sigma_at(level))))


def _empty_result(dim: int):
    return (np.zeros((0, 2), np.float32), np.zeros(0, np.float32),
            np.zeros((0, dim), np.float32))


def _local_maxima(response: np.ndarray, floor: float):
    """(v, u) of pixels strictly above all 8 neighbors and the floor."""
    h, w = response.shape
    center = response[1:-1, 1:-1]
    peak = center >= floor
    for dv in (-1, 0, 1):
        for du in (-1, 0, 1):
            if dv == 0 and du == 0:
                continue
            peak &= center > response[1 + dv:h - 1 + dv, 1 + du:w - 1 + du]
    vs, us = np.nonzero(peak)
    return vs + 1, us + 1


def _level_descriptors(blurred: np.ndarray, us: np.ndarray, vs: np.ndarray,
                       cell_px: int, config: DetectorConfig) -> np.ndarray:
    """Histogram gradient orientations over a cells x cells patch grid."""
    cells = config.descriptor_cells
    bins = config.orientation_bins
    side = cells * cell_px
    half = side // 2

    gv, gu = np.gradient(blurred)
    magnitude = np.hypot(gu, gv)
    bin_width = 2.0 * math.pi / bins
    orientation_bin = ((np.arctan2(gv, gu) + math.pi) // bin_width).astype(int) % bins

    offsets = np.arange(side) - half
    rows = vs[:, None, None] + offsets[None, :, None]
    cols = us[:, None, None] + offsets[None, None, :]
    patch_mag = magnitude[rows, cols]
    patch_bin = orientation_bin[rows, cols]

    cell_of = np.arange(side) // cell_px
    cell_index = cell_of[:, None] * cells + cell_of[None, :]
    flat = cell_index[None, :, :] * bins + patch_bin

    n = len(us)
    dim = config.descriptor_dim
    flat = flat + dim * np.arange(n)[:, None, None]
    return np.bincount(flat.ravel(), weights=patch_mag.ravel(),
                       minlength=n * dim).reshape(n, dim)


def _normalize_descriptors(raw: np.ndarray, clip_fraction: float):
    """Unit-normalize rows with clipped re-normalization; flags zero rows."""
    norms = np.linalg.norm(raw, axis=1, keepdims=True)
    valid = norms[:, 0] > 0.0
    unit = raw[valid] / norms[valid]
    if clip_fraction < 1.0:
        unit = np.minimum(unit, clip_fraction)
        unit = unit / np.linalg.norm(unit, axis=1, keepdims=True)
    return unit.astype(np.float32), valid


def detect_features(image: np.ndarray, config: DetectorConfig | None = None):
    """Detect keypoints on one grayscale image.

    Returns (positions, scores, descriptors): positions (n, 2) float32 as
    (u, v) integer pixel centers, scores (n,) float32 in (0, 1] with the
    strongest response at 1, descriptors (n, dim) unit-norm float32. The
    result is sorted by descending score with deterministic tie-breaks.
    """
    config = config or DetectorConfig()
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise ExtractionError(f"detector expects a 2-d grayscale image, got shape {img.shape}")
    h, w = img.shape

    blurred = [ndimage.gaussian_filter(img, config.sigma_at(k))
               for k in range(config.scale_count + 1)]

    all_resp, all_us, all_vs, all_lvl = [], [], [], []
    for k in range(config.scale_count):
        response = np.abs(blurred[k + 1] - blurred[k])
        vs, us = _local_maxima(response, config.response_floor)
        half = config.descriptor_cells * config.cell_px_at(k) // 2
        keep = ((us >= half) & (us + half <= w)
                & (vs >= half) & (vs + half <= h))
        us, vs = us[keep], vs[keep]
        all_resp.append(response[vs, us])
        all_us.append(us)
        all_vs.append(vs)
        all_lvl.append(np.full(len(us), k))

    resp = np.concatenate(all_resp)
    if len(resp) == 0:
        return _empty_result(config.descriptor_dim)
    us = np.concatenate(all_us)
    vs = np.concatenate(all_vs)
    lvl = np.concatenate(all_lvl)

    order = np.lexsort((lvl, us, vs, -resp))[:config.max_features]
    resp, us, vs, lvl = resp[order], us[order], vs[order], lvl[order]

    descriptors = np.zeros((len(us), config.descriptor_dim))
    for k in np.unique(lvl):
        sel = lvl == k
        descriptors[sel] = _level_descriptors(
            blurred[k], us[sel], vs[sel], config.cell_px_at(k), config)
    descriptors, valid = _normalize_descriptors(descriptors, config.clip_fraction)
    resp, us, vs = resp[valid], us[valid], vs[valid]
    if len(resp) == 0:
        return _empty_result(config.descriptor_dim)

    positions = np.stack([us, vs], axis=1).astype(np.float32)
    scores = (resp / resp.max()).astype(np.float32)
    return positions, scores, descriptors


def resolve_detector(spec: str, config: DetectorConfig | None = None):
    """Map a model name to a detector callable.

    "dog" is the built-in detector above; anything containing a colon is
    imported as "package.module:function" and used as-is.
    """
    if spec == "dog":
        cfg = config or DetectorConfig()

        def detector(image: np.ndarray):
            return detect_features(image, cfg)
        return detector
    if ":" not in spec:
        raise ExtractionError(
            f"model must be 'dog' or an external 'module:function', got {spec!r}")
    module_name, func_name = spec.split(":", 1)
    module = importlib.import_module(module_name)
    return getattr(module, func_name)
