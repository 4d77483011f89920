"""Region-of-interest isolation: blur, adaptive thresholding, opening.

The chain converts a color fundus image to grayscale, smooths it with a
separable Gaussian, binarizes with a per-pixel local-mean threshold and
cleans the result with a morphological opening. Threshold and morphology
run on exact integer arithmetic (summed-area tables) so they agree with
brute-force references bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    EmptyRoiError,
    InvalidBlockSizeError,
    InvalidKernelError,
    InvalidRadiusError,
    InvalidSigmaError,
)
from .imaging import GrayImage, RasterImage, to_grayscale


@dataclass(frozen=True)
class BinaryMask:
    """(h, w) uint8 array holding only 0 (background) and 1 (ROI)."""

    pixels: np.ndarray

    def __post_init__(self):
        p = self.pixels
        if p.ndim != 2 or p.shape[0] < 1 or p.shape[1] < 1:
            raise ValueError(f"expected nonempty (h, w) array, got shape {p.shape}")
        if p.dtype != np.uint8:
            raise ValueError(f"expected uint8 mask, got {p.dtype}")
        if p.max(initial=0) > 1:
            raise ValueError("mask values must be 0 or 1")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def foreground_count(self) -> int:
        return int(self.pixels.sum())


@dataclass(frozen=True)
class SegmentationConfig:
    """Parameters of the segmentation chain.

    blur_kernel and block_size must be odd; threshold_offset is the constant
    subtracted from the local mean (positive values make the threshold more
    permissive).
    """

    blur_kernel: int = 5
    blur_sigma: float = 1.0
    block_size: int = 51
    threshold_offset: float = 2.0
    opening_radius: int = 2

    def __post_init__(self):
        if self.blur_kernel < 1 or self.blur_kernel % 2 == 0:
            raise InvalidKernelError(f"blur_kernel must be odd >= 1, got {self.blur_kernel}")
        if self.blur_sigma <= 0:
            raise InvalidSigmaError(f"blur_sigma must be > 0, got {self.blur_sigma}")
        if self.block_size < 3 or self.block_size % 2 == 0:
            raise InvalidBlockSizeError(f"block_size must be odd >= 3, got {self.block_size}")
        if self.opening_radius < 1:
            raise InvalidRadiusError(f"opening_radius must be >= 1, got {self.opening_radius}")


def gaussian_kernel_1d(kernel: int, sigma: float) -> np.ndarray:
    """Sampled Gaussian taps normalized to sum 1."""
    half = kernel // 2
    offsets = np.arange(-half, half + 1, dtype=np.float64)
    w = np.exp(-(offsets ** 2) / (2.0 * sigma * sigma))
    return w / w.sum()


def gaussian_blur(img: GrayImage, kernel: int, sigma: float) -> GrayImage:
    """Separable Gaussian smoothing with edge-replicated borders.

    The two passes run in float64 and the result is re-quantized to 8 bits
    once, rounding half away from zero, so the output equals a direct 2-D
    convolution with the normalized outer-product kernel.
    """
    if kernel % 2 == 0 or kernel < 1 or kernel > min(img.width, img.height):
        raise InvalidKernelError(
            f"kernel must be odd and within 1..min(w,h), got {kernel}")
    if sigma <= 0:
        raise InvalidSigmaError(f"sigma must be > 0, got {sigma}")

    w = gaussian_kernel_1d(kernel, sigma)
    half = kernel // 2
    acc = img.pixels.astype(np.float64)
    if half > 0:
        padded = np.pad(acc, ((0, 0), (half, half)), mode="edge")
        acc = sum(w[i] * padded[:, i:i + img.width] for i in range(kernel))
        padded = np.pad(acc, ((half, half), (0, 0)), mode="edge")
        acc = sum(w[i] * padded[i:i + img.height, :] for i in range(kernel))
    return GrayImage(np.floor(acc + 0.5).astype(np.uint8))


def _window_sums(values: np.ndarray, radius: int, pad_mode: str) -> np.ndarray:
    """Integer sum of each (2*radius+1)^2 window via a summed-area table."""
    side = 2 * radius + 1
    if pad_mode == "edge":
        padded = np.pad(values, radius, mode="edge").astype(np.int64)
    else:
        padded = np.pad(values, radius, mode="constant").astype(np.int64)
    sat = np.zeros((padded.shape[0] + 1, padded.shape[1] + 1), dtype=np.int64)
    np.cumsum(padded, axis=0, out=sat[1:, 1:])
    np.cumsum(sat[1:, 1:], axis=1, out=sat[1:, 1:])
    h, w = values.shape
    return (sat[side:side + h, side:side + w]
            - sat[:h, side:side + w]
            - sat[side:side + h, :w]
            + sat[:h, :w])


def adaptive_threshold(img: GrayImage, block_size: int, offset: float) -> BinaryMask:
    """Mark pixel 1 iff its value exceeds the local block mean minus offset.

    The block mean uses edge replication outside the image. Sums are exact
    integers; the single float division per pixel matches a brute-force
    per-pixel reference exactly.
    """
    if block_size < 3 or block_size % 2 == 0:
        raise InvalidBlockSizeError(f"block_size must be odd >= 3, got {block_size}")
    radius = block_size // 2
    sums = _window_sums(img.pixels, radius, pad_mode="edge")
    means = sums.astype(np.float64) / float(block_size * block_size)
    fg = img.pixels.astype(np.float64) > (means - offset)
    return BinaryMask(fg.astype(np.uint8))


def morphological_open(mask: BinaryMask, radius: int) -> BinaryMask:
    """Erosion followed by dilation with a square element of side 2*radius+1.

    Pixels outside the image count as background for both passes, so
    foreground touching the border is trimmed by the erosion.
    """
    if radius < 1:
        raise InvalidRadiusError(f"radius must be >= 1, got {radius}")
    side = 2 * radius + 1
    full = side * side
    eroded = (_window_sums(mask.pixels, radius, pad_mode="constant") == full)
    dilated = (_window_sums(eroded.astype(np.uint8), radius, pad_mode="constant") >= 1)
    return BinaryMask(dilated.astype(np.uint8))


def segment(img: RasterImage, cfg: SegmentationConfig) -> tuple[BinaryMask, RasterImage]:
    """Run the full chain and return (mask, masked color image).

    Background pixels are zeroed in every channel of the returned image.
    Raises EmptyRoiError when the final mask has no foreground; callers that
    must not drop records can substitute full_mask() instead.
    """
    gray = to_grayscale(img)
    blurred = gaussian_blur(gray, cfg.blur_kernel, cfg.blur_sigma)
    mask = adaptive_threshold(blurred, cfg.block_size, cfg.threshold_offset)
    mask = morphological_open(mask, cfg.opening_radius)
    if mask.foreground_count() == 0:
        raise EmptyRoiError("segmentation produced an empty mask")
    return mask, apply_mask(img, mask)


def apply_mask(img: RasterImage, mask: BinaryMask) -> RasterImage:
    """Zero out background pixels in all channels."""
    return RasterImage(img.pixels * mask.pixels[:, :, None])


def full_mask(width: int, height: int) -> BinaryMask:
    """All-foreground mask, the degenerate-segmentation fallback."""
    return BinaryMask(np.ones((height, width), dtype=np.uint8))


def mask_to_image(mask: BinaryMask) -> GrayImage:
    """Render a mask as 0/255 grayscale for PNG export."""
    return GrayImage((mask.pixels * 255).astype(np.uint8))
