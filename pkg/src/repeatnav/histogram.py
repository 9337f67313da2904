"""Histogram-of-shifts similarity and 2D displacement estimation.

Matched features vote into a 2D grid over (horizontal, vertical) pixel
displacement. Each vote spreads Gaussian-weighted mass, scaled by the match
weight, over the bins within a truncation radius of the match's bin. The
maximum accumulator is the similarity score of the image pair and the
winning bin's center is the shift estimate.

Grid layout: bins are centered at integer multiples of bin_size_px, with
half-extent K = ceil(image_extent / bin_size_px) bins per axis, so the grid
covers displacements in roughly [-W, +W] x [-H, +H]. A displacement maps to
the bin index floor(d / bin_size + 0.5) (half-ties round toward +inf). Ties
on the maximum accumulator resolve to the bin center closest to (0, 0),
then to the lowest row-major index (rows are vertical displacement).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .features import FeatureSet, match_arrays


@dataclass(frozen=True)
class HistogramConfig:
    """Voting grid parameters. Sigma and truncation are in bin units."""

    bin_size_px: int = 4
    gaussian_sigma_bins: float = 2.0
    gaussian_truncate_bins: int = 6

    def __post_init__(self):
        if self.bin_size_px < 1:
            raise ValueError("bin_size_px must be >= 1")
        if self.gaussian_sigma_bins <= 0:
            raise ValueError("gaussian_sigma_bins must be positive")
        if self.gaussian_truncate_bins < 0:
            raise ValueError("gaussian_truncate_bins must be nonnegative")

    @property
    def sigma_px(self) -> float:
        return self.gaussian_sigma_bins * self.bin_size_px


@dataclass(frozen=True)
class ShiftEstimate:
    """Winning-bin shift (pixels), its accumulator value, and match count."""

    horizontal_shift_px: float
    vertical_shift_px: float
    similarity: float
    match_count: int

    @property
    def shift(self) -> tuple[float, float]:
        return (self.horizontal_shift_px, self.vertical_shift_px)


NO_SHIFT = ShiftEstimate(0.0, 0.0, 0.0, 0)


def displacement_to_bin(displacement, bin_size_px: int) -> np.ndarray:
    """Signed bin index of a displacement; half-ties round toward +inf."""
    d = np.asarray(displacement, dtype=np.float64)
    return np.floor(d / bin_size_px + 0.5).astype(np.int64)


class ShiftHistogram:
    """Dense vote accumulation grid over 2D pixel displacements.

    Single-writer; concurrent pair evaluations each use their own instance.
    """

    def __init__(self, image_size, config: HistogramConfig | None = None):
        self.config = config or HistogramConfig()
        w, h = int(image_size[0]), int(image_size[1])
        b = self.config.bin_size_px
        self.half_extent_x = math.ceil(w / b)
        self.half_extent_y = math.ceil(h / b)
        # rows: vertical displacement, cols: horizontal
        self.bins = np.zeros((2 * self.half_extent_y + 1,
                              2 * self.half_extent_x + 1))

    @property
    def shape(self) -> tuple[int, int]:
        return self.bins.shape

    def bin_center(self, row: int, col: int) -> tuple[float, float]:
        b = self.config.bin_size_px
        return (float((col - self.half_extent_x) * b),
                float((row - self.half_extent_y) * b))

    def vote(self, displacement, weight: float) -> None:
        self.vote_many(np.asarray(displacement, dtype=np.float64).reshape(1, 2),
                       np.asarray([weight], dtype=np.float64))

    def vote_many(self, displacements: np.ndarray, weights: np.ndarray) -> None:
        """Accumulate Gaussian-spread votes for a batch of matches.

        For each bin within gaussian_truncate_bins (Chebyshev, in bin units)
        of a match's bin, the accumulator gains
        weight * exp(-||center - displacement||^2 / (2 * sigma_px^2)).
        """
        if len(displacements) == 0:
            return
        cfg = self.config
        b = cfg.bin_size_px
        t = cfg.gaussian_truncate_bins
        inv_two_sigma_sq = 1.0 / (2.0 * cfg.sigma_px ** 2)

        d = np.asarray(displacements, dtype=np.float64).reshape(-1, 2)
        w = np.asarray(weights, dtype=np.float64).reshape(-1)
        home = displacement_to_bin(d, b)  # (m, 2) signed indices

        offsets = np.arange(-t, t + 1)
        # candidate bin indices per match, per axis: (m, 2t+1)
        cand_x = home[:, 0:1] + offsets[None, :]
        cand_y = home[:, 1:2] + offsets[None, :]
        center_x = cand_x * float(b)
        center_y = cand_y * float(b)
        dx2 = (center_x - d[:, 0:1]) ** 2   # (m, k)
        dy2 = (center_y - d[:, 1:2]) ** 2
        # joint exponent, matching the contract formula exactly
        contrib = w[:, None, None] * np.exp(
            -(dy2[:, :, None] + dx2[:, None, :]) * inv_two_sigma_sq)

        rows = cand_y + self.half_extent_y   # (m, k)
        cols = cand_x + self.half_extent_x
        valid_r = (rows >= 0) & (rows < self.bins.shape[0])
        valid_c = (cols >= 0) & (cols < self.bins.shape[1])
        mask = valid_r[:, :, None] & valid_c[:, None, :]

        rr = np.broadcast_to(rows[:, :, None], mask.shape)[mask]
        cc = np.broadcast_to(cols[:, None, :], mask.shape)[mask]
        np.add.at(self.bins, (rr, cc), contrib[mask])

    def argmax_estimate(self, match_count: int) -> ShiftEstimate:
        """Winning bin as a ShiftEstimate, applying the documented tie rule."""
        peak = float(self.bins.max())
        if peak <= 0.0:
            return ShiftEstimate(0.0, 0.0, peak if peak > 0 else 0.0, match_count)
        rows, cols = np.nonzero(self.bins == peak)
        b = self.config.bin_size_px
        cx = (cols - self.half_extent_x) * float(b)
        cy = (rows - self.half_extent_y) * float(b)
        dist2 = cx ** 2 + cy ** 2
        flat = rows * self.bins.shape[1] + cols
        best = np.lexsort((flat, dist2))[0]
        return ShiftEstimate(float(cx[best]), float(cy[best]), peak, match_count)


def estimate_shift(query: FeatureSet, reference: FeatureSet,
                   config: HistogramConfig | None = None,
                   feature_cap: int | None = None) -> ShiftEstimate:
    """Match two feature sets and locate the dominant displacement.

    Mutual-NN matches vote into a fresh histogram; the peak accumulator is
    the similarity, the winning bin center the (horizontal, vertical) shift.
    Zero matches yield the zero estimate with similarity 0 rather than an
    error, so callers can treat it as "no information".
    """
    config = config or HistogramConfig()
    _, _, weights, displacements = match_arrays(query, reference, feature_cap)
    if len(weights) == 0:
        return NO_SHIFT
    hist = ShiftHistogram(query.image_size, config)
    hist.vote_many(displacements, weights)
    return hist.argmax_estimate(len(weights))


def similarity_only(query: FeatureSet, reference: FeatureSet,
                    config: HistogramConfig | None = None,
                    feature_cap: int | None = None) -> float:
    """Similarity score alone; equal to estimate_shift(...).similarity."""
    return estimate_shift(query, reference, config, feature_cap).similarity
