"""Seven rotation/scale/translation-invariant shape moments of a binary mask."""

from __future__ import annotations

import numpy as np

from ..errors import EmptyImageError
from ..segmentation import BinaryMask

LOG_EPS = 1e-30


def hu_moments(mask: BinaryMask) -> np.ndarray:
    """Hu invariants of the mask foreground, in signed-log form.

    Each invariant h is reported as -sign(h) * log10(|h| + 1e-30), which
    compresses the raw 10-orders-of-magnitude spread into a range usable
    by distance-based classifiers.
    """
    ys, xs = np.nonzero(mask.pixels)
    if xs.size == 0:
        raise EmptyImageError("mask has no foreground pixel")
    x = xs.astype(np.float64)
    y = ys.astype(np.float64)
    n = float(xs.size)
    x = x - x.sum() / n
    y = y - y.sum() / n

    def mu(p, q):
        return float(np.sum(x ** p * y ** q)) if p or q else n

    # Scale-normalized central moments eta_pq = mu_pq / mu00^(1 + (p+q)/2).
    def eta(p, q):
        return mu(p, q) / n ** (1.0 + (p + q) / 2.0)

    e20, e02, e11 = eta(2, 0), eta(0, 2), eta(1, 1)
    e30, e03, e21, e12 = eta(3, 0), eta(0, 3), eta(2, 1), eta(1, 2)

    a = e30 + e12
    b = e21 + e03
    c = e30 - 3 * e12
    d = 3 * e21 - e03

    h = np.empty(7, dtype=np.float64)
    h[0] = e20 + e02
    h[1] = (e20 - e02) ** 2 + 4 * e11 ** 2
    h[2] = c ** 2 + d ** 2
    h[3] = a ** 2 + b ** 2
    h[4] = c * a * (a ** 2 - 3 * b ** 2) + d * b * (3 * a ** 2 - b ** 2)
    h[5] = (e20 - e02) * (a ** 2 - b ** 2) + 4 * e11 * a * b
    h[6] = d * a * (a ** 2 - 3 * b ** 2) - c * b * (3 * a ** 2 - b ** 2)

    return -np.sign(h) * np.log10(np.abs(h) + LOG_EPS)
