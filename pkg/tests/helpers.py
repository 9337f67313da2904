"""Shared constructors for test fixtures."""

import numpy as np

from repeatnav.features import FeatureSet, global_descriptor_from_locals
from repeatnav.geometry import CameraModel
from repeatnav.histogram import HistogramConfig
from repeatnav.teach import CaptureConfig, Keyframe, TaughtPath


def unit_rows(rng, n, dim):
    """Random unit-norm descriptor rows; distinct with high margin."""
    rows = rng.standard_normal((n, dim))
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


def random_feature_set(rng, image_size, n, local_dim=64):
    w, h = image_size
    positions = np.column_stack([rng.uniform(0, w - 1e-3, n),
                                 rng.uniform(0, h - 1e-3, n)])
    scores = rng.uniform(0.5, 1.0, n)
    descriptors = unit_rows(rng, n, local_dim)
    global_desc = global_descriptor_from_locals(descriptors)
    return FeatureSet(image_size, positions, scores, descriptors, global_desc)


def planted_pair(rng, image_size, n, shift, jitter=0.0, local_dim=64):
    """Query/reference sets with identical descriptors per index, so every
    feature matches its twin, and reference positions displaced by `shift`
    (displacement convention: reference minus query) plus optional jitter.
    """
    w, h = image_size
    sx, sy = shift
    lo_x = max(0.0, -sx) + jitter
    hi_x = min(w - 1e-3, w - 1e-3 - sx) - jitter
    lo_y = max(0.0, -sy) + jitter
    hi_y = min(h - 1e-3, h - 1e-3 - sy) - jitter
    positions = np.column_stack([rng.uniform(lo_x, hi_x, n),
                                 rng.uniform(lo_y, hi_y, n)])
    offsets = rng.uniform(-jitter, jitter, (n, 2)) if jitter else 0.0
    ref_positions = positions + np.asarray(shift) + offsets
    scores = rng.uniform(0.5, 1.0, n)
    descriptors = unit_rows(rng, n, local_dim)
    global_desc = global_descriptor_from_locals(descriptors)
    query = FeatureSet(image_size, positions, scores, descriptors, global_desc)
    reference = FeatureSet(image_size, ref_positions, scores, descriptors,
                           global_desc)
    return query, reference


def make_database(rng, count=12, spacing=1.0, image_size=(128, 96),
                  features_per_frame=20):
    """A TaughtPath of independent random keyframes at even spacing."""
    camera = CameraModel(500.0, (image_size[0] / 2.0, image_size[1] / 2.0),
                         image_size)
    keyframes = []
    for i in range(count):
        fs = random_feature_set(rng, image_size, features_per_frame)
        keyframes.append(Keyframe(index=i, arc_length=i * spacing, features=fs,
                                  taught_forward_speed=0.4,
                                  taught_curvature=0.0))
    return TaughtPath(keyframes=tuple(keyframes),
                      total_length=(count - 1) * spacing, camera=camera,
                      capture_config=CaptureConfig(),
                      histogram_config=HistogramConfig())
