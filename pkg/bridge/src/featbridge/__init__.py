"""Offline feature extraction for appearance-based navigation on real images.

Converts directories of photographs into the binary feature files and JSON
manifests consumed by the repeatnav package: keypoints with detector scores
and unit-norm local descriptors, one mean-pooled unit-norm global
descriptor per image, a loadable map manifest for image sequences, and a
shift-evaluation dataset manifest for 9-view grids. The detector is
pluggable; the built-in one needs no learned weights, so extraction is
fully deterministic.

The two packages share only their file formats: this package never imports
repeatnav.
"""

from .detector import DetectorConfig, detect_features, resolve_detector
from .errors import ExtractionError, ImageReadError
from .extract import (ExtractConfig, ExtractReport, ImageResult,
                      extract_directory)
from .formats import (pooled_global_descriptor, write_feature_file,
                      write_json)
from .image_io import load_grayscale

__version__ = "0.1.0"

__all__ = [
    "DetectorConfig", "detect_features", "resolve_detector",
    "ExtractionError", "ImageReadError",
    "ExtractConfig", "ExtractReport", "ImageResult", "extract_directory",
    "pooled_global_descriptor", "write_feature_file", "write_json",
    "load_grayscale",
    "__version__",
]
