"""Image loading: grayscale conversion and optional square resize.

All detectors in this package operate on single-channel float arrays in
[0, 1]. Loading is deterministic: the same image bytes always produce the
same array, so downstream outputs are bit-reproducible.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ImageReadError

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff")


def is_image_file(path: Path) -> bool:
    return path.is_file() and path.suffix.lower() in IMAGE_SUFFIXES


def load_grayscale(path: str | Path, resize_px: int | None = None) -> np.ndarray:
    """Read an image as float32 grayscale in [0, 1], resized to a square.

    resize_px of None (or a matching input size) leaves the pixels intact,
    which keeps already-conformant inputs bit-stable across tools.
    """
    try:
        with Image.open(path) as img:
            img = img.convert("L")
            if resize_px is not None and img.size != (resize_px, resize_px):
                img = img.resize((resize_px, resize_px), Image.LANCZOS)
            array = np.asarray(img, dtype=np.float32)
    except (OSError, ValueError) as exc:
        raise ImageReadError(f"cannot read image {path}: {exc}") from exc
    return array / 255.0
