"""Local directional pattern histogram built from Kirsch edge responses."""

from __future__ import annotations

from math import comb

import numpy as np

from ..errors import DegenerateRoiError, InvalidKError
from ..imaging import GrayImage
from ..segmentation import BinaryMask

# Clockwise ring of 3x3 positions, starting at the top-left corner.
_RING = ((0, 0), (0, 1), (0, 2), (1, 2), (2, 2), (2, 1), (2, 0), (1, 0))
# East-facing base mask laid out along _RING.
_EAST_RING = (-3, -3, 5, 5, 5, -3, -3, -3)


def kirsch_masks() -> np.ndarray:
    """The eight 3x3 compass masks, index 0 East, rotating clockwise."""
    masks = np.zeros((8, 3, 3), dtype=np.float64)
    for rot in range(8):
        for pos, (ry, rx) in enumerate(_RING):
            masks[rot, ry, rx] = _EAST_RING[(pos - rot) % 8]
    return masks


_MASKS = kirsch_masks()


def ldp_code_table(k: int) -> np.ndarray:
    """Map each 8-bit code with exactly k set bits to its histogram bin."""
    table = np.full(256, -1, dtype=np.int64)
    legal = [c for c in range(256) if bin(c).count("1") == k]
    for bin_idx, code in enumerate(legal):
        table[code] = bin_idx
    return table


def ldp_features(gray: GrayImage, roi: BinaryMask, k: int = 3) -> np.ndarray:
    """Normalized histogram of per-pixel directional codes.

    At each interior ROI pixel the eight Kirsch responses are ranked by
    absolute value (ties go to the lower mask index) and the top k mask
    indices become the set bits of the code. The histogram runs over the
    C(8, k) legal codes and sums to 1.
    """
    if not 1 <= k <= 7:
        raise InvalidKError(f"k must be in 1..7, got {k}")
    h, w = gray.pixels.shape
    if h < 3 or w < 3:
        raise DegenerateRoiError("image too small for a 3x3 neighborhood")
    centers = roi.pixels[1:h - 1, 1:w - 1].astype(bool)
    if not centers.any():
        raise DegenerateRoiError("no interior ROI pixel")

    img = gray.pixels.astype(np.float64)
    responses = np.empty((8, h - 2, w - 2), dtype=np.float64)
    for m in range(8):
        acc = np.zeros((h - 2, w - 2), dtype=np.float64)
        for dy in range(3):
            for dx in range(3):
                weight = _MASKS[m, dy, dx]
                if weight != 0.0:
                    acc += weight * img[dy:dy + h - 2, dx:dx + w - 2]
        responses[m] = acc

    flat = np.abs(responses[:, centers])          # (8, n_pixels)
    order = np.argsort(-flat, axis=0, kind="stable")
    codes = np.zeros(flat.shape[1], dtype=np.int64)
    for rank in range(k):
        codes |= np.int64(1) << order[rank]

    table = ldp_code_table(k)
    hist = np.bincount(table[codes], minlength=comb(8, k)).astype(np.float64)
    return hist / hist.sum()
