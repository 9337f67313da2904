"""Two-stage visual place recognition over the taught database.

Stage one (filtering) preselects the K keyframes whose global descriptors
have the highest cosine similarity to the query. Stage two (re-ranking)
scores each candidate with the histogram of shifts, which also yields the
shift estimate for the best match. When localization is confident enough,
stage one can be bypassed: only keyframes within an arc-length window of
the current estimate are re-ranked.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .features import FeatureSet, cosine_similarity
from .histogram import ShiftEstimate, estimate_shift
from .teach import TaughtPath


@dataclass(frozen=True)
class VprConfig:
    """Candidate count for filtering and the window used when bypassing it.

    neighborhood_window is in meters; None means 3 x mean keyframe spacing,
    resolved against the database at query time.
    """

    candidate_count: int = 10
    filtering_enabled: bool = True
    neighborhood_window: float | None = None

    def __post_init__(self):
        if self.candidate_count < 1:
            raise ConfigurationError("candidate_count must be >= 1")
        if self.neighborhood_window is not None and self.neighborhood_window <= 0:
            raise ConfigurationError("neighborhood_window must be positive")

    def resolve_window(self, database: TaughtPath) -> float:
        if self.neighborhood_window is not None:
            return self.neighborhood_window
        return 3.0 * database.mean_spacing


@dataclass(frozen=True)
class ScoredCandidate:
    keyframe_index: int
    similarity: float
    shift: ShiftEstimate


@dataclass(frozen=True)
class VprResult:
    """Re-ranked candidates, best first. Never empty."""

    candidates: tuple[ScoredCandidate, ...]
    filtering_used: bool

    @property
    def best(self) -> ScoredCandidate:
        return self.candidates[0]

    @property
    def best_index(self) -> int:
        return self.candidates[0].keyframe_index

    def score_by_index(self) -> dict[int, float]:
        """Similarity per returned keyframe; absent keyframes score zero."""
        return {c.keyframe_index: c.similarity for c in self.candidates}


def filter_candidates(query_global: np.ndarray, database: TaughtPath,
                      candidate_count: int) -> list[int]:
    """Indices of the K keyframes most similar by global descriptor.

    Deterministic: ties break toward the lower keyframe index.
    """
    sims = np.asarray([cosine_similarity(query_global, kf.features.global_descriptor)
                       for kf in database.keyframes])
    order = np.lexsort((np.arange(len(sims)), -sims))
    return [int(i) for i in order[:candidate_count]]


def _window_candidates(database: TaughtPath, estimate: float,
                       window: float) -> list[int]:
    arcs = database.arc_lengths
    inside = np.nonzero(np.abs(arcs - estimate) <= window)[0]
    if len(inside) == 0:
        # estimate drifted outside all keyframes; fall back to the nearest
        return [database.nearest_index(estimate)]
    return [int(i) for i in inside]


def recognize(query: FeatureSet, database: TaughtPath,
              config: VprConfig | None = None,
              current_estimate: float | None = None) -> VprResult:
    """Retrieve the best-matching keyframe and its shift estimate.

    With filtering enabled the whole database is preselected by global
    descriptor; otherwise only keyframes within the neighborhood window of
    current_estimate are scored (a confident tracker does not need the
    global stage). Scores depend only on the image pair, so a keyframe
    scored in both modes receives the same similarity.
    """
    config = config or VprConfig()
    if config.filtering_enabled:
        indices = filter_candidates(query.global_descriptor, database,
                                    config.candidate_count)
        filtering_used = True
    else:
        if current_estimate is None:
            raise ConfigurationError(
                "recognize without filtering requires a current estimate")
        indices = _window_candidates(database, current_estimate,
                                     config.resolve_window(database))
        filtering_used = False

    scored = []
    for idx in indices:
        est = estimate_shift(query, database.keyframes[idx].features,
                             database.histogram_config)
        scored.append(ScoredCandidate(idx, est.similarity, est))
    scored.sort(key=lambda c: (-c.similarity, c.keyframe_index))
    return VprResult(candidates=tuple(scored[:config.candidate_count]),
                     filtering_used=filtering_used)
