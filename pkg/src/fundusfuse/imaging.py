"""Canonical raster containers plus load / resize / color-convert primitives.

Every downstream stage consumes the two containers defined here. Pixel data
is always 8-bit; 16-bit sources are right-shifted on load and alpha channels
are dropped. Resampling is bilinear with half-pixel-centered sample mapping,
grayscale conversion uses the BT.601 luma weights.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DecodeError, EmptyImageError, UnsupportedChannelCountError

GRAY_WEIGHTS = (0.299, 0.587, 0.114)


@dataclass(frozen=True)
class RasterImage:
    """Color (h, w, 3) or single-channel (h, w, 1) uint8 image.

    The pixel array is owned by the instance and must be treated as
    immutable; operations always allocate new images.
    """

    pixels: np.ndarray

    def __post_init__(self):
        p = self.pixels
        if p.ndim != 3 or p.shape[2] not in (1, 3):
            raise UnsupportedChannelCountError(
                f"expected (h, w, 1|3) array, got shape {p.shape}")
        if p.shape[0] < 1 or p.shape[1] < 1:
            raise EmptyImageError("zero-pixel image")
        if p.dtype != np.uint8:
            raise DecodeError(f"expected uint8 samples, got {p.dtype}")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]


@dataclass(frozen=True)
class GrayImage:
    """Single-channel (h, w) uint8 luma image."""

    pixels: np.ndarray

    def __post_init__(self):
        p = self.pixels
        if p.ndim != 2:
            raise UnsupportedChannelCountError(
                f"expected (h, w) array, got shape {p.shape}")
        if p.shape[0] < 1 or p.shape[1] < 1:
            raise EmptyImageError("zero-pixel image")
        if p.dtype != np.uint8:
            raise DecodeError(f"expected uint8 samples, got {p.dtype}")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


def load_image(path: str | Path) -> RasterImage:
    """Decode a PNG or JPEG file into a RasterImage.

    Grayscale sources keep one channel, color sources keep three. Alpha is
    dropped without compositing, 16-bit samples are right-shifted to 8 bits
    and palette images are expanded to RGB.

    Raises FileNotFoundError, DecodeError for undecodable content, and
    UnsupportedChannelCountError for layouts outside gray / RGB.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            if mode == "P":
                im = im.convert("RGBA") if "transparency" in im.info else im.convert("RGB")
                mode = im.mode
            if mode == "1":
                im = im.convert("L")
                mode = "L"
            arr = np.asarray(im)
    except UnidentifiedImageError as exc:
        raise DecodeError(f"{path}: not a decodable PNG/JPEG") from exc
    except (OSError, SyntaxError, ValueError) as exc:
        raise DecodeError(f"{path}: {exc}") from exc

    if mode in ("I", "I;16", "I;16L", "I;16B"):
        # 16-bit grayscale PNG: keep the high byte.
        arr = (arr.astype(np.uint32) >> 8).astype(np.uint8)
        return RasterImage(arr[:, :, None])
    if mode == "L":
        return RasterImage(arr.astype(np.uint8)[:, :, None])
    if mode == "LA":
        return RasterImage(arr[:, :, :1].astype(np.uint8))
    if mode == "RGB":
        return RasterImage(arr.astype(np.uint8))
    if mode == "RGBA":
        return RasterImage(arr[:, :, :3].astype(np.uint8))
    raise UnsupportedChannelCountError(f"{path}: unsupported pixel mode {mode!r}")


def save_png(img: RasterImage | GrayImage, path: str | Path) -> None:
    """Encode an image losslessly as 8-bit PNG."""
    arr = img.pixels
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    Image.fromarray(arr).save(Path(path), format="PNG")


def resize_bilinear(img: RasterImage, out_w: int, out_h: int) -> RasterImage:
    """Resample to (out_w, out_h) with half-pixel-centered bilinear weights.

    Identical dimensions reproduce the input bit-exactly and constant images
    stay constant. Raises EmptyImageError when either output dimension < 1.
    """
    if out_w < 1 or out_h < 1:
        raise EmptyImageError(f"requested empty output {out_w}x{out_h}")
    in_h, in_w = img.height, img.width
    if (out_w, out_h) == (in_w, in_h):
        return RasterImage(img.pixels.copy())

    src = img.pixels.astype(np.float64)
    x0, x1, fx = _sample_axis(in_w, out_w)
    y0, y1, fy = _sample_axis(in_h, out_h)

    rows0 = src[y0]  # (out_h, in_w, c)
    rows1 = src[y1]
    top = rows0[:, x0] * (1.0 - fx)[None, :, None] + rows0[:, x1] * fx[None, :, None]
    bot = rows1[:, x0] * (1.0 - fx)[None, :, None] + rows1[:, x1] * fx[None, :, None]
    out = top * (1.0 - fy)[:, None, None] + bot * fy[:, None, None]
    return RasterImage(np.floor(out + 0.5).astype(np.uint8))


def _sample_axis(in_n: int, out_n: int):
    """Half-pixel source coordinates for one axis: floor index, next index, fraction."""
    pos = (np.arange(out_n, dtype=np.float64) + 0.5) * in_n / out_n - 0.5
    base = np.floor(pos)
    frac = pos - base
    i0 = np.clip(base, 0, in_n - 1).astype(np.intp)
    i1 = np.clip(base + 1, 0, in_n - 1).astype(np.intp)
    return i0, i1, frac


def to_grayscale(img: RasterImage) -> GrayImage:
    """BT.601 luma conversion, rounding half away from zero.

    Single-channel inputs pass through unchanged.
    """
    if img.channels == 1:
        return GrayImage(img.pixels[:, :, 0].copy())
    r, g, b = GRAY_WEIGHTS
    luma = (r * img.pixels[:, :, 0].astype(np.float64)
            + g * img.pixels[:, :, 1]
            + b * img.pixels[:, :, 2])
    return GrayImage(np.floor(luma + 0.5).astype(np.uint8))


def expand_to_color(img: RasterImage) -> RasterImage:
    """Replicate a single channel across RGB; color inputs pass through."""
    if img.channels == 3:
        return img
    return RasterImage(np.repeat(img.pixels, 3, axis=2))
