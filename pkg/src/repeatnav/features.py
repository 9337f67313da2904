"""Local features, mutual-nearest-neighbor matching, and the binary feature file.

A FeatureSet holds pixel keypoints with detector scores and unit-norm
descriptors, plus one unit-norm global descriptor for the whole image.
Descriptor distance is Euclidean on unit vectors, which is monotone in the
dot product; matching therefore maximizes dot products and breaks ties by
the lower index. All numeric payloads are float32 so that the on-disk
format round-trips bit-exactly.

Binary feature file layout (little-endian throughout):

    magic "TRFV" | version u16 | flags u16 | image_w u32 | image_h u32 |
    feature_count u32 | local_dim u16 | global_dim u16 |
    global descriptor (global_dim x f32) |
    per feature: u f32, v f32, score f32, descriptor (local_dim x f32)
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigurationError,
    DegenerateDescriptorError,
    EmptyFrameError,
    FeatureFileError,
)

MAGIC = b"TRFV"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHHIIIHH")

DEFAULT_LOCAL_DIM = 64
DEFAULT_GLOBAL_DIM = 256

UNIT_NORM_TOL = 1e-6


def unit_normalize(vec: np.ndarray) -> np.ndarray:
    """L2-normalize in float64, returning float32."""
    v = np.asarray(vec, dtype=np.float64)
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise DegenerateDescriptorError("cannot normalize a zero vector")
    return (v / norm).astype(np.float32)


@dataclass(frozen=True)
class Feature:
    """One keypoint: pixel position, detector score, unit-norm descriptor."""

    position: np.ndarray
    score: float
    descriptor: np.ndarray


class FeatureSet:
    """Keypoints and descriptors extracted from one image.

    Stored as packed arrays: positions (n, 2), scores (n,), descriptors
    (n, d), all float32. The global descriptor is unit-norm, except for the
    empty frame where it is all zeros (so similarity against it is 0).
    """

    def __init__(self, image_size, positions, scores, descriptors,
                 global_descriptor, validate: bool = True):
        self.image_size = (int(image_size[0]), int(image_size[1]))
        self.positions = np.asarray(positions, dtype=np.float32).reshape(-1, 2)
        self.scores = np.asarray(scores, dtype=np.float32).reshape(-1)
        n = len(self.positions)
        descriptors = np.asarray(descriptors, dtype=np.float32)
        if descriptors.ndim != 2:
            descriptors = descriptors.reshape(n, -1)
        self.descriptors = descriptors
        self.global_descriptor = np.asarray(
            global_descriptor, dtype=np.float32).reshape(-1)
        for arr in (self.positions, self.scores, self.descriptors,
                    self.global_descriptor):
            arr.flags.writeable = False
        if validate:
            self._validate()

    def _validate(self):
        w, h = self.image_size
        if len(self.scores) != len(self.positions):
            raise ConfigurationError("scores and positions length mismatch")
        if self.descriptors.shape[0] != len(self.positions):
            raise ConfigurationError("descriptors and positions length mismatch")
        if np.any(self.scores < 0):
            raise ConfigurationError("feature scores must be nonnegative")
        if len(self.positions) > 0:
            u, v = self.positions[:, 0], self.positions[:, 1]
            if np.any((u < 0) | (u >= w) | (v < 0) | (v >= h)):
                raise ConfigurationError("feature positions outside image bounds")
            norms = np.linalg.norm(self.descriptors.astype(np.float64), axis=1)
            if np.any(np.abs(norms - 1.0) > UNIT_NORM_TOL):
                raise ConfigurationError("descriptors must be unit-norm")
        gnorm = float(np.linalg.norm(self.global_descriptor.astype(np.float64)))
        if gnorm != 0.0 and abs(gnorm - 1.0) > UNIT_NORM_TOL:
            raise ConfigurationError("global descriptor must be unit-norm or zero")

    def __len__(self) -> int:
        return len(self.positions)

    @property
    def local_dim(self) -> int:
        return self.descriptors.shape[1]

    @property
    def features(self) -> list[Feature]:
        return [Feature(self.positions[i], float(self.scores[i]), self.descriptors[i])
                for i in range(len(self))]

    @classmethod
    def empty(cls, image_size, local_dim: int = DEFAULT_LOCAL_DIM,
              global_dim: int = DEFAULT_GLOBAL_DIM) -> "FeatureSet":
        return cls(image_size,
                   np.zeros((0, 2), np.float32),
                   np.zeros(0, np.float32),
                   np.zeros((0, local_dim), np.float32),
                   np.zeros(global_dim, np.float32))


@dataclass(frozen=True)
class Match:
    """A mutual-nearest-neighbor pair.

    weight is the exact sum of the two features' scores; displacement is
    reference position minus query position, in pixels.
    """

    query_index: int
    reference_index: int
    weight: float
    displacement: np.ndarray


def _top_by_score(scores: np.ndarray, cap: int) -> np.ndarray:
    """Indices of the cap highest-score features, ties by lower index."""
    order = np.argsort(-scores, kind="stable")[:cap]
    return np.sort(order)


def match_arrays(query: FeatureSet, reference: FeatureSet,
                 feature_cap: int | None = None):
    """Mutual-NN matching on packed arrays.

    Returns (query_indices, reference_indices, weights, displacements),
    sorted by query index. Indices refer to the original feature sets even
    when feature_cap subsamples the inputs by score.
    """
    if query.local_dim != reference.local_dim:
        raise ConfigurationError(
            f"descriptor dimensions differ: {query.local_dim} vs {reference.local_dim}")
    qi_pool = np.arange(len(query))
    ri_pool = np.arange(len(reference))
    if feature_cap is not None:
        if len(query) > feature_cap:
            qi_pool = _top_by_score(query.scores, feature_cap)
        if len(reference) > feature_cap:
            ri_pool = _top_by_score(reference.scores, feature_cap)
    if len(qi_pool) == 0 or len(ri_pool) == 0:
        return (np.zeros(0, int), np.zeros(0, int),
                np.zeros(0, np.float32), np.zeros((0, 2), np.float32))

    qd = query.descriptors[qi_pool].astype(np.float64)
    rd = reference.descriptors[ri_pool].astype(np.float64)
    sims = qd @ rd.T
    # argmax takes the first maximum, i.e. the lowest index on ties
    nn_of_q = sims.argmax(axis=1)
    nn_of_r = sims.argmax(axis=0)
    mutual = nn_of_r[nn_of_q] == np.arange(len(qi_pool))
    q_sel = np.nonzero(mutual)[0]
    r_sel = nn_of_q[q_sel]

    qi = qi_pool[q_sel]
    ri = ri_pool[r_sel]
    weights = query.scores[qi] + reference.scores[ri]
    displacements = reference.positions[ri] - query.positions[qi]
    return qi, ri, weights, displacements


def match_mutual_nn(query: FeatureSet, reference: FeatureSet,
                    feature_cap: int | None = None) -> list[Match]:
    """Cross-checked nearest-neighbor matches between two feature sets.

    A pair (q, r) is kept exactly when r is q's nearest descriptor neighbor
    and q is r's; each feature appears in at most one match.
    """
    qi, ri, weights, displacements = match_arrays(query, reference, feature_cap)
    return [Match(int(q), int(r), float(w), d)
            for q, r, w, d in zip(qi, ri, weights, displacements)]


def global_descriptor_from_locals(descriptors, global_dim: int = DEFAULT_GLOBAL_DIM) -> np.ndarray:
    """Mean-pool local descriptors into a unit-norm global descriptor.

    The mean is truncated or zero-padded to global_dim before normalizing.
    Raises EmptyFrameError for an empty input and DegenerateDescriptorError
    when the mean is the zero vector.
    """
    desc = np.asarray(descriptors, dtype=np.float64)
    if desc.ndim == 1:
        desc = desc.reshape(1, -1)
    if desc.shape[0] == 0:
        raise EmptyFrameError("no local features to pool a global descriptor from")
    mean = desc.mean(axis=0)
    if len(mean) >= global_dim:
        pooled = mean[:global_dim]
    else:
        pooled = np.zeros(global_dim)
        pooled[:len(mean)] = mean
    return unit_normalize(pooled)


def cosine_similarity(a, b) -> float:
    """Dot product of two unit-norm vectors."""
    return float(np.dot(np.asarray(a, dtype=np.float64),
                        np.asarray(b, dtype=np.float64)))


def write_feature_file(path, fs: FeatureSet, flags: int = 0) -> None:
    """Serialize a FeatureSet to the binary feature-file format."""
    n = len(fs)
    local_dim = fs.local_dim
    global_dim = len(fs.global_descriptor)
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, flags,
                          fs.image_size[0], fs.image_size[1],
                          n, local_dim, global_dim)
    body = fs.global_descriptor.astype("<f4").tobytes()
    per_feature = np.empty((n, 3 + local_dim), dtype="<f4")
    per_feature[:, 0:2] = fs.positions
    per_feature[:, 2] = fs.scores
    per_feature[:, 3:] = fs.descriptors
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(body)
        fh.write(per_feature.tobytes())


def read_feature_file(path, validate: bool = True) -> FeatureSet:
    """Parse a binary feature file; FeatureFileError names the bad offset."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _HEADER.size:
        raise FeatureFileError("truncated header", len(data))
    magic, version, _flags, w, h, count, local_dim, global_dim = \
        _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise FeatureFileError(f"bad magic {magic!r}", 0)
    if version != FORMAT_VERSION:
        raise FeatureFileError(f"unsupported version {version}", 4)
    offset = _HEADER.size
    g_bytes = 4 * global_dim
    if len(data) < offset + g_bytes:
        raise FeatureFileError("truncated global descriptor", len(data))
    global_desc = np.frombuffer(data, dtype="<f4", count=global_dim, offset=offset)
    offset += g_bytes
    row = 3 + local_dim
    f_bytes = 4 * row * count
    if len(data) != offset + f_bytes:
        bad = min(len(data), offset + f_bytes)
        raise FeatureFileError(
            f"feature table size mismatch: expected {offset + f_bytes} bytes, "
            f"got {len(data)}", bad)
    table = np.frombuffer(data, dtype="<f4", count=row * count,
                          offset=offset).reshape(count, row)
    return FeatureSet((w, h), table[:, 0:2], table[:, 2], table[:, 3:],
                      global_desc, validate=validate)
