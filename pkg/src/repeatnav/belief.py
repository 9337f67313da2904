"""Particle filter tracking the 1D arc-length position along the taught path.

Particles carry an arc-length position and a weight. Motion shifts every
particle by the odometry distance plus Gaussian noise proportional to the
distance; particles leaving the trajectory are re-drawn uniformly.
Measurement multiplies each weight by the VPR similarity interpolated
between the particle's two neighboring keyframes (keyframes absent from the
VPR result score zero), with a small floor so the filter survives frames
with no overlap. A fixed fraction of the lowest-weight particles is then
replaced by uniform re-draws, which restores global search after tracking
failures.

The position estimate is the unweighted mean of the five highest-weight
particles (ties prefer lower arc length). Certainty is the weight fraction
within a window of the estimate; it drives hysteresis between
initialization mode (search, robot holds) and navigation mode, and can
additionally bypass the VPR filtering stage when very high.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .teach import TaughtPath
from .vpr import VprResult

ESTIMATE_PARTICLE_COUNT = 5


class Mode(enum.Enum):
    INITIALIZATION = "initialization"
    NAVIGATION = "navigation"


@dataclass(frozen=True)
class BeliefConfig:
    """Filter size, noise, resampling, and hysteresis thresholds.

    certainty_window is in meters; None means 2 x mean keyframe spacing,
    resolved against the database. noise_floor_m keeps a minimum motion
    jitter so a stationary filter still explores locally.
    """

    particle_count: int = 200
    motion_noise_sigma: float = 0.05
    noise_floor_m: float = 0.01
    discard_fraction: float = 0.05
    weight_floor: float = 1e-6
    certainty_window: float | None = None
    certainty_enter_nav: float = 0.6
    certainty_exit_nav: float = 0.3
    skip_filtering_threshold: float = 0.8

    def __post_init__(self):
        if self.particle_count < ESTIMATE_PARTICLE_COUNT:
            raise ConfigurationError("particle_count too small")
        if self.motion_noise_sigma < 0 or self.noise_floor_m < 0:
            raise ConfigurationError("noise parameters must be nonnegative")
        if not 0.0 <= self.discard_fraction < 1.0:
            raise ConfigurationError("discard_fraction must be in [0, 1)")
        if self.weight_floor <= 0:
            raise ConfigurationError("weight_floor must be positive")
        ordered = (0.0 < self.certainty_exit_nav < self.certainty_enter_nav
                   <= self.skip_filtering_threshold <= 1.0)
        if not ordered:
            raise ConfigurationError(
                "requires 0 < exit_nav < enter_nav <= skip_filtering <= 1")

    def resolve_window(self, database: TaughtPath) -> float:
        if self.certainty_window is not None:
            return self.certainty_window
        return 2.0 * database.mean_spacing


@dataclass(frozen=True)
class Belief:
    """Immutable snapshot of the filter state. Arrays are read-only."""

    positions: np.ndarray
    weights: np.ndarray
    mode: Mode
    certainty: float

    def __post_init__(self):
        for arr in (self.positions, self.weights):
            arr.setflags(write=False)

    def __len__(self) -> int:
        return len(self.positions)


def estimate_position(positions: np.ndarray, weights: np.ndarray) -> float:
    """Mean arc length of the five highest-weight particles (ties: lower s)."""
    k = min(ESTIMATE_PARTICLE_COUNT, len(positions))
    best = np.lexsort((positions, -weights))[:k]
    return float(np.mean(positions[best]))


def certainty_at(positions: np.ndarray, weights: np.ndarray,
                 window: float) -> float:
    """Weight fraction within +-window of the current estimate."""
    center = estimate_position(positions, weights)
    inside = np.abs(positions - center) <= window
    return float(np.sum(weights[inside]))


def mode_transition(mode: Mode, certainty: float,
                    config: BeliefConfig) -> tuple[Mode, bool]:
    """Hysteresis mode switch plus the filtering-bypass flag."""
    if mode is Mode.INITIALIZATION and certainty >= config.certainty_enter_nav:
        mode = Mode.NAVIGATION
    elif mode is Mode.NAVIGATION and certainty < config.certainty_exit_nav:
        mode = Mode.INITIALIZATION
    skip = mode is Mode.NAVIGATION and certainty >= config.skip_filtering_threshold
    return mode, skip


class PathBeliefFilter:
    """Owns the particle arrays and RNG; one instance per navigation session.

    predict/update/estimate are serialized by the single owner; snapshot()
    hands immutable copies to concurrent readers.
    """

    def __init__(self, database: TaughtPath, config: BeliefConfig | None = None,
                 rng: np.random.Generator | int | None = None):
        self.database = database
        self.config = config or BeliefConfig()
        if isinstance(rng, np.random.Generator):
            self.rng = rng
        else:
            self.rng = np.random.default_rng(rng)
        self.window = self.config.resolve_window(database)
        n = self.config.particle_count
        self.positions = self.rng.uniform(0.0, database.total_length, size=n)
        self.weights = np.full(n, 1.0 / n)
        self.mode = Mode.INITIALIZATION
        self.skip_filtering = False
        self._refresh_certainty()

    def _refresh_certainty(self) -> None:
        self.certainty = certainty_at(self.positions, self.weights, self.window)
        self.mode, self.skip_filtering = mode_transition(
            self.mode, self.certainty, self.config)

    def _redraw_out_of_range(self) -> None:
        length = self.database.total_length
        out = (self.positions < 0.0) | (self.positions > length)
        count = int(np.sum(out))
        if count:
            self.positions[out] = self.rng.uniform(0.0, length, size=count)

    def predict(self, traveled: float) -> Belief:
        """Shift particles by the odometry distance with proportional noise."""
        if traveled < 0:
            raise ValueError("traveled distance must be nonnegative")
        sigma = self.config.motion_noise_sigma * max(
            traveled, self.config.noise_floor_m)
        noise = 0.0
        if sigma > 0:
            noise = self.rng.normal(0.0, sigma, size=len(self.positions))
        self.positions = self.positions + traveled + noise
        self._redraw_out_of_range()
        self.weights = self.weights / np.sum(self.weights)
        self._refresh_certainty()
        return self.snapshot()

    def update(self, vpr: VprResult) -> Belief:
        """Fuse one VPR result; resamples the lowest-weight fraction."""
        arcs = self.database.arc_lengths
        scores = np.zeros(len(arcs))
        for cand in vpr.candidates:
            scores[cand.keyframe_index] = cand.similarity
        # np.interp clamps at the ends: one-sided neighbor rule at endpoints
        interpolated = np.interp(self.positions, arcs, scores)
        self.weights = self.weights * (interpolated + self.config.weight_floor)
        self.weights = self.weights / np.sum(self.weights)

        n = len(self.positions)
        replace = int(round(self.config.discard_fraction * n))
        if replace:
            lowest = np.argsort(self.weights, kind="stable")[:replace]
            self.positions[lowest] = self.rng.uniform(
                0.0, self.database.total_length, size=replace)
            self.weights[lowest] = 1.0 / n
            self.weights = self.weights / np.sum(self.weights)
        self._refresh_certainty()
        return self.snapshot()

    def estimate(self) -> float:
        return estimate_position(self.positions, self.weights)

    def snapshot(self) -> Belief:
        return Belief(positions=self.positions.copy(),
                      weights=self.weights.copy(),
                      mode=self.mode, certainty=self.certainty)
