"""Handcrafted descriptor blocks: Hu, Zernike, Haralick, LDP, color histogram.

extract_all() is the single entry point the pipeline uses; the individual
extractors are importable for targeted use. Every extractor is pure and
deterministic: identical inputs yield bit-identical vectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import EmptyRoiError
from ..imaging import RasterImage, to_grayscale
from ..segmentation import BinaryMask
from .colorhist import color_histogram
from .glcm import GlcmConfig, haralick_features
from .hu import hu_moments
from .ldp import ldp_features
from .zernike import zernike_moments

BLOCK_ORDER = ("hu", "zernike", "haralick", "ldp", "color_hist", "deep")


@dataclass(frozen=True)
class FeatureVector:
    """One named block of real-valued features."""

    block_name: str
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1:
            raise ValueError(f"feature block must be 1-D, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError(f"non-finite value in block {self.block_name!r}")
        if self.block_name not in BLOCK_ORDER:
            raise ValueError(f"unknown block name {self.block_name!r}")
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class FeatureParams:
    """Descriptor parameters; the defaults give 613 handcrafted dimensions."""

    zernike_order: int = 8
    glcm: GlcmConfig = field(default_factory=GlcmConfig)
    ldp_k: int = 3
    hist_bins: int = 8


def extract_all(img: RasterImage, mask: BinaryMask,
                params: FeatureParams | None = None) -> list[FeatureVector]:
    """Compute the five handcrafted blocks in canonical order.

    Shape moments read the mask, texture descriptors read the masked
    grayscale, the histogram reads the masked color pixels. Extractor
    errors propagate to the caller.
    """
    params = params or FeatureParams()
    if mask.foreground_count() == 0:
        raise EmptyRoiError("cannot extract features from an empty mask")
    gray = to_grayscale(img)
    return [
        FeatureVector("hu", hu_moments(mask)),
        FeatureVector("zernike", zernike_moments(mask, params.zernike_order)),
        FeatureVector("haralick", haralick_features(gray, mask, params.glcm)),
        FeatureVector("ldp", ldp_features(gray, mask, params.ldp_k)),
        FeatureVector("color_hist", color_histogram(img, mask, params.hist_bins)),
    ]
