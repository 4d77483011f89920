"""Gray-level co-occurrence matrices and the 13 classic texture statistics."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateRoiError
from ..imaging import GrayImage
from ..segmentation import BinaryMask

log = logging.getLogger(__name__)

# (dy, dx) steps for the four supported directions, distance 1.
_ANGLE_STEPS = {0: (0, 1), 45: (-1, 1), 90: (-1, 0), 135: (-1, -1)}

N_HARALICK = 13


@dataclass(frozen=True)
class GlcmConfig:
    levels: int = 32
    distances: tuple[int, ...] = (1, 2)
    angles: tuple[int, ...] = (0, 45, 90, 135)
    symmetric: bool = True
    normalized: bool = True

    def __post_init__(self):
        if self.levels < 2:
            raise ValueError(f"levels must be >= 2, got {self.levels}")
        if not self.distances or any(d < 1 for d in self.distances):
            raise ValueError(f"distances must all be >= 1, got {self.distances}")
        bad = [a for a in self.angles if a not in _ANGLE_STEPS]
        if bad or not self.angles:
            raise ValueError(f"angles must be from {sorted(_ANGLE_STEPS)}, got {self.angles}")


def quantize_levels(gray: GrayImage, roi: BinaryMask, levels: int) -> np.ndarray:
    """Equal-width binning of ROI intensities over their own min..max range.

    A constant ROI collapses to level 0. Non-ROI pixels get level 0 too but
    are never paired.
    """
    vals = gray.pixels.astype(np.int64)
    inside = roi.pixels.astype(bool)
    if not inside.any():
        return np.zeros_like(vals)
    lo = int(vals[inside].min())
    hi = int(vals[inside].max())
    if hi == lo:
        return np.zeros_like(vals)
    q = (vals - lo) * levels // (hi - lo + 1)
    return np.clip(q, 0, levels - 1)


def glcm_matrix(quantized: np.ndarray, roi: np.ndarray, levels: int,
                distance: int, angle: int, symmetric: bool, normalized: bool) -> np.ndarray:
    """Co-occurrence counts for one (distance, angle); both ends must be in the ROI."""
    dy, dx = _ANGLE_STEPS[angle]
    dy, dx = dy * distance, dx * distance
    h, w = quantized.shape

    ys0 = slice(max(0, -dy), min(h, h - dy))
    xs0 = slice(max(0, -dx), min(w, w - dx))
    ys1 = slice(max(0, dy), min(h, h + dy))
    xs1 = slice(max(0, dx), min(w, w + dx))

    a = quantized[ys0, xs0]
    b = quantized[ys1, xs1]
    valid = roi[ys0, xs0] & roi[ys1, xs1]
    if a.size == 0 or not valid.any():
        return np.zeros((levels, levels), dtype=np.float64)

    codes = a[valid] * levels + b[valid]
    counts = np.bincount(codes, minlength=levels * levels).reshape(levels, levels)
    mat = counts.astype(np.float64)
    if symmetric:
        mat = mat + mat.T
    if normalized and mat.sum() > 0:
        mat = mat / mat.sum()
    return mat


def haralick_features(gray: GrayImage, roi: BinaryMask, cfg: GlcmConfig) -> np.ndarray:
    """13 texture statistics averaged over every (distance, angle) matrix.

    Order: ASM, contrast, correlation, variance, inverse difference moment,
    sum average, sum variance, sum entropy, entropy, difference variance,
    difference entropy, and the two information measures of correlation.
    Raises DegenerateRoiError when no direction yields a co-occurring pair.
    """
    quant = quantize_levels(gray, roi, cfg.levels)
    inside = roi.pixels.astype(bool)
    per_matrix = []
    for distance in cfg.distances:
        for angle in cfg.angles:
            mat = glcm_matrix(quant, inside, cfg.levels, distance, angle,
                              cfg.symmetric, cfg.normalized)
            total = mat.sum()
            if total == 0:
                continue
            if abs(total - 1.0) > 1e-9:  # cfg.normalized may be off
                mat = mat / total
            per_matrix.append(_stats_13(mat))
    if not per_matrix:
        raise DegenerateRoiError("ROI contains no valid co-occurring pair")
    return np.mean(np.array(per_matrix, dtype=np.float64), axis=0)


def _entropy(p: np.ndarray) -> float:
    """Shannon entropy (nats) over the positive entries only, so a
    single-cell distribution scores exactly 0."""
    pos = p[p > 0]
    return float(-(pos * np.log(pos)).sum())


def _stats_13(p: np.ndarray) -> np.ndarray:
    levels = p.shape[0]
    idx = np.arange(levels, dtype=np.float64)
    i = idx[:, None]
    j = idx[None, :]

    px = p.sum(axis=1)
    py = p.sum(axis=0)
    flat = p.ravel()

    k_sum = (i + j).astype(np.intp).ravel()
    p_sum = np.bincount(k_sum, weights=flat, minlength=2 * levels - 1)
    k_diff = np.abs(i - j).astype(np.intp).ravel()
    p_diff = np.bincount(k_diff, weights=flat, minlength=levels)
    ks = np.arange(p_sum.size, dtype=np.float64)
    kd = np.arange(p_diff.size, dtype=np.float64)

    mean_x = float((idx * px).sum())
    mean_y = float((idx * py).sum())
    var_x = float(((idx - mean_x) ** 2 * px).sum())
    var_y = float(((idx - mean_y) ** 2 * py).sum())

    asm = float((p * p).sum())
    contrast = float((kd ** 2 * p_diff).sum())
    denom = np.sqrt(var_x * var_y)
    if denom > 0:
        correlation = float(((i * j * p).sum() - mean_x * mean_y) / denom)
    else:
        correlation = 0.0
        log.debug("flat marginal: correlation forced to 0")
    variance = var_x
    idm = float((p / (1.0 + (i - j) ** 2)).sum())
    sum_avg = float((ks * p_sum).sum())
    sum_var = float(((ks - sum_avg) ** 2 * p_sum).sum())
    sum_entropy = _entropy(p_sum)
    entropy = _entropy(flat)
    diff_mean = float((kd * p_diff).sum())
    diff_var = float(((kd - diff_mean) ** 2 * p_diff).sum())
    diff_entropy = _entropy(p_diff)

    hx = _entropy(px)
    hy = _entropy(py)
    marg = px[:, None] * py[None, :]
    mask_p = p > 0
    hxy1 = float(-(p[mask_p] * np.log(marg[mask_p])).sum())
    mask_m = marg > 0
    hxy2 = float(-(marg[mask_m] * np.log(marg[mask_m])).sum())
    imc1 = (entropy - hxy1) / max(hx, hy) if max(hx, hy) > 0 else 0.0
    imc2 = float(np.sqrt(max(0.0, 1.0 - np.exp(-2.0 * (hxy2 - entropy)))))

    return np.array([asm, contrast, correlation, variance, idm, sum_avg,
                     sum_var, sum_entropy, entropy, diff_var, diff_entropy,
                     imc1, imc2], dtype=np.float64)
