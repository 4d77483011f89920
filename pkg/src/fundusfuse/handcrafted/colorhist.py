"""Joint RGB histogram over the region of interest."""

from __future__ import annotations

import numpy as np

from ..errors import EmptyRoiError, NotColorImageError
from ..imaging import RasterImage
from ..segmentation import BinaryMask


def color_histogram(img: RasterImage, roi: BinaryMask, bins_per_channel: int = 8) -> np.ndarray:
    """Normalized joint (R, G, B) histogram of ROI pixels.

    Bin index per channel is floor(v * bins / 256); the flat layout is
    R-major, then G, then B, giving bins**3 values summing to 1.
    """
    if img.channels != 3:
        raise NotColorImageError(f"need 3 channels, got {img.channels}")
    if bins_per_channel < 2:
        raise ValueError(f"bins_per_channel must be >= 2, got {bins_per_channel}")
    inside = roi.pixels.astype(bool)
    if not inside.any():
        raise EmptyRoiError("color histogram needs a nonempty ROI")

    b = bins_per_channel
    binned = (img.pixels[inside].astype(np.int64) * b) // 256   # (n, 3)
    flat = (binned[:, 0] * b + binned[:, 1]) * b + binned[:, 2]
    hist = np.bincount(flat, minlength=b ** 3).astype(np.float64)
    return hist / hist.sum()
