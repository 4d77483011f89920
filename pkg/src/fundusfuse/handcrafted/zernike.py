"""Zernike moment magnitudes of a binary mask, rotation-invariant by design."""

from __future__ import annotations

from math import factorial, pi

import numpy as np

from ..errors import EmptyImageError, InvalidOrderError
from ..segmentation import BinaryMask


def zernike_index_pairs(max_order: int) -> list[tuple[int, int]]:
    """All (n, m) with n <= max_order, m >= 0 and n - m even, (n, m) ascending."""
    return [(n, m) for n in range(max_order + 1) for m in range(n + 1) if (n - m) % 2 == 0]


def radial_polynomial(n: int, m: int, rho: np.ndarray) -> np.ndarray:
    """R_nm evaluated with exact integer coefficients."""
    out = np.zeros_like(rho)
    for s in range((n - m) // 2 + 1):
        coeff = ((-1) ** s * factorial(n - s)
                 // (factorial(s) * factorial((n + m) // 2 - s) * factorial((n - m) // 2 - s)))
        out += coeff * rho ** (n - 2 * s)
    return out


def zernike_moments(mask: BinaryMask, max_order: int = 8) -> np.ndarray:
    """Magnitudes |Z(n, m)| for every legal (n, m) up to max_order.

    Foreground pixels are mapped onto the unit disk centered at their
    centroid, with radius equal to the farthest foreground pixel. Each
    moment is (n+1)/pi times the mean projection onto the conjugate
    Zernike polynomial. max_order 8 yields 25 values.
    """
    if max_order < 0:
        raise InvalidOrderError(f"max_order must be >= 0, got {max_order}")
    ys, xs = np.nonzero(mask.pixels)
    if xs.size == 0:
        raise EmptyImageError("mask has no foreground pixel")

    dx = xs.astype(np.float64) - xs.sum() / xs.size
    dy = ys.astype(np.float64) - ys.sum() / ys.size
    r = np.hypot(dx, dy)
    r_max = r.max()
    if r_max > 0:
        rho = r / r_max
        theta = np.arctan2(dy, dx)
    else:
        rho = np.zeros_like(r)
        theta = np.zeros_like(r)

    out = np.empty(len(zernike_index_pairs(max_order)), dtype=np.float64)
    for i, (n, m) in enumerate(zernike_index_pairs(max_order)):
        basis = radial_polynomial(n, m, rho) * np.exp(-1j * m * theta)
        out[i] = abs((n + 1) / pi * basis.mean())
    return out
