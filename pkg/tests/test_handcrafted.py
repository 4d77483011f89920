import math
from math import comb, factorial, pi

import numpy as np
import pytest

from conftest import random_blob_mask, random_color_image
from fundusfuse.errors import (
    DegenerateRoiError,
    EmptyImageError,
    EmptyRoiError,
    InvalidKError,
    InvalidOrderError,
    NotColorImageError,
)
from fundusfuse.handcrafted import FeatureParams, FeatureVector, extract_all
from fundusfuse.handcrafted.colorhist import color_histogram
from fundusfuse.handcrafted.glcm import GlcmConfig, glcm_matrix, haralick_features, quantize_levels
from fundusfuse.handcrafted.hu import hu_moments
from fundusfuse.handcrafted.ldp import ldp_features
from fundusfuse.handcrafted.zernike import zernike_index_pairs, zernike_moments
from fundusfuse.imaging import GrayImage, RasterImage, to_grayscale
from fundusfuse.segmentation import BinaryMask


# --- Hu moments ---------------------------------------------------------------

def _hu_ref(mask: np.ndarray) -> np.ndarray:
    """Independent scalar evaluation of the seven invariants."""
    ys, xs = np.nonzero(mask)
    pts = list(zip(xs.tolist(), ys.tolist()))
    n = len(pts)
    xbar = sum(p[0] for p in pts) / n
    ybar = sum(p[1] for p in pts) / n

    def eta(p, q):
        mu = sum((x - xbar) ** p * (y - ybar) ** q for x, y in pts)
        return mu / n ** (1 + (p + q) / 2)

    n20, n02, n11 = eta(2, 0), eta(0, 2), eta(1, 1)
    n30, n03, n21, n12 = eta(3, 0), eta(0, 3), eta(2, 1), eta(1, 2)
    h = [
        n20 + n02,
        (n20 - n02) ** 2 + 4 * n11 ** 2,
        (n30 - 3 * n12) ** 2 + (3 * n21 - n03) ** 2,
        (n30 + n12) ** 2 + (n21 + n03) ** 2,
        (n30 - 3 * n12) * (n30 + n12) * ((n30 + n12) ** 2 - 3 * (n21 + n03) ** 2)
        + (3 * n21 - n03) * (n21 + n03) * (3 * (n30 + n12) ** 2 - (n21 + n03) ** 2),
        (n20 - n02) * ((n30 + n12) ** 2 - (n21 + n03) ** 2)
        + 4 * n11 * (n30 + n12) * (n21 + n03),
        (3 * n21 - n03) * (n30 + n12) * ((n30 + n12) ** 2 - 3 * (n21 + n03) ** 2)
        - (n30 - 3 * n12) * (n21 + n03) * (3 * (n30 + n12) ** 2 - (n21 + n03) ** 2),
    ]
    return np.array([-math.copysign(1, v) * math.log10(abs(v) + 1e-30) if v else 0.0
                     for v in h])


class TestHuMoments:
    def test_matches_scalar_reference(self):
        for seed in (3, 11, 27):
            mask = random_blob_mask(seed)
            got = hu_moments(mask)
            assert np.allclose(got, _hu_ref(mask.pixels), atol=1e-9)

    def test_translation_invariance(self):
        for seed in range(8):
            mask = random_blob_mask(seed)
            shifted = BinaryMask(np.roll(mask.pixels, (13, -7), axis=(0, 1)))
            assert np.allclose(hu_moments(mask), hu_moments(shifted), atol=1e-9)

    def test_rotation_invariance(self):
        for seed in range(8):
            mask = random_blob_mask(seed)
            for k in (1, 2, 3):
                rotated = BinaryMask(np.ascontiguousarray(np.rot90(mask.pixels, k)))
                assert np.allclose(hu_moments(mask), hu_moments(rotated), atol=1e-2)

    def test_scale_invariance_2x(self):
        mask = random_blob_mask(5)
        up = np.kron(mask.pixels, np.ones((2, 2), dtype=np.uint8))
        assert np.allclose(hu_moments(mask), hu_moments(BinaryMask(up)), atol=1e-2)

    def test_empty_mask_rejected(self):
        with pytest.raises(EmptyImageError):
            hu_moments(BinaryMask(np.zeros((8, 8), dtype=np.uint8)))

    def test_dim_is_seven(self):
        assert hu_moments(random_blob_mask(1)).shape == (7,)


# --- Zernike moments ----------------------------------------------------------

def _zernike_ref(mask: np.ndarray, max_order: int) -> np.ndarray:
    """Scalar projection onto the conjugate polynomial basis."""
    ys, xs = np.nonzero(mask)
    n_px = xs.size
    cx = xs.sum() / n_px
    cy = ys.sum() / n_px
    rmax = max(math.hypot(x - cx, y - cy) for x, y in zip(xs, ys))
    out = []
    for n in range(max_order + 1):
        for m in range(n + 1):
            if (n - m) % 2:
                continue
            total = 0j
            for x, y in zip(xs.tolist(), ys.tolist()):
                dx, dy = x - cx, y - cy
                rho = math.hypot(dx, dy) / rmax if rmax > 0 else 0.0
                theta = math.atan2(dy, dx)
                radial = sum(
                    (-1) ** s * factorial(n - s)
                    / (factorial(s) * factorial((n + m) // 2 - s) * factorial((n - m) // 2 - s))
                    * rho ** (n - 2 * s)
                    for s in range((n - m) // 2 + 1))
                total += radial * complex(math.cos(m * theta), -math.sin(m * theta))
            out.append(abs((n + 1) / pi * total / n_px))
    return np.array(out)


class TestZernikeMoments:
    def test_dim_for_order_8(self):
        pairs = zernike_index_pairs(8)
        assert len(pairs) == 25
        assert zernike_moments(random_blob_mask(2), 8).shape == (25,)

    def test_matches_scalar_reference(self):
        mask = random_blob_mask(9, size=48, margin=12)
        got = zernike_moments(mask, 6)
        assert np.allclose(got, _zernike_ref(mask.pixels, 6), rtol=1e-9, atol=1e-12)

    def test_solid_disk_concentrates_in_rotation_free_terms(self):
        size = 64
        yy, xx = np.mgrid[0:size, 0:size]
        disk = ((xx - 32) ** 2 + (yy - 32) ** 2 <= 25 ** 2).astype(np.uint8)
        got = zernike_moments(BinaryMask(disk), 8)
        ref = _zernike_ref(disk, 8)
        assert np.allclose(got, ref, rtol=1e-9, atol=1e-12)
        z00 = got[0]
        assert z00 > 0
        for (n, m), value in zip(zernike_index_pairs(8), got):
            if m != 0:
                assert value < 0.05 * z00

    def test_rotation_invariance(self):
        for seed in range(6):
            mask = random_blob_mask(seed + 100)
            base = zernike_moments(mask, 8)
            rotated = zernike_moments(
                BinaryMask(np.ascontiguousarray(np.rot90(mask.pixels))), 8)
            assert np.allclose(base, rotated, rtol=1e-6)

    def test_errors(self):
        with pytest.raises(EmptyImageError):
            zernike_moments(BinaryMask(np.zeros((4, 4), dtype=np.uint8)), 8)
        with pytest.raises(InvalidOrderError):
            zernike_moments(random_blob_mask(0), -1)

    def test_single_pixel_mask_is_finite(self):
        mask = np.zeros((8, 8), dtype=np.uint8)
        mask[3, 3] = 1
        values = zernike_moments(BinaryMask(mask), 8)
        assert np.all(np.isfinite(values))


# --- Haralick / GLCM ----------------------------------------------------------

def _full_roi(shape):
    return BinaryMask(np.ones(shape, dtype=np.uint8))


class TestGlcm:
    def test_constant_roi_anchor_values(self):
        gray = GrayImage(np.full((16, 16), 77, dtype=np.uint8))
        feats = haralick_features(gray, _full_roi((16, 16)), GlcmConfig())
        asm, contrast, entropy = feats[0], feats[1], feats[8]
        assert asm == 1.0
        assert contrast == 0.0
        assert entropy == 0.0

    def test_checkerboard_2x2_exact(self):
        gray = GrayImage(np.array([[0, 1], [1, 0]], dtype=np.uint8))
        cfg = GlcmConfig(levels=2, distances=(1,), angles=(0,))
        quant = quantize_levels(gray, _full_roi((2, 2)), 2)
        mat = glcm_matrix(quant, np.ones((2, 2), dtype=bool), 2, 1, 0,
                          symmetric=True, normalized=True)
        assert np.array_equal(mat, np.array([[0.0, 0.5], [0.5, 0.0]]))
        feats = haralick_features(gray, _full_roi((2, 2)), cfg)
        assert feats[0] == 0.5   # angular second moment
        assert feats[1] == 1.0   # contrast

    def test_checkerboard_255_exact(self):
        pixels = np.array([[0, 255], [255, 0]], dtype=np.uint8)
        cfg = GlcmConfig(levels=2, distances=(1,), angles=(0,))
        feats = haralick_features(GrayImage(pixels), _full_roi((2, 2)), cfg)
        assert feats[0] == 0.5
        assert feats[1] == 1.0

    def test_matrix_matches_bruteforce_counts(self, rng):
        pixels = rng.integers(0, 256, size=(12, 12), dtype=np.uint8)
        roi = rng.random((12, 12)) > 0.3
        levels = 8
        quant = quantize_levels(GrayImage(pixels), BinaryMask(roi.astype(np.uint8)), levels)
        steps = {0: (0, 1), 45: (-1, 1), 90: (-1, 0), 135: (-1, -1)}
        for angle, (dy, dx) in steps.items():
            for distance in (1, 2):
                ref = np.zeros((levels, levels))
                for y in range(12):
                    for x in range(12):
                        yy, xx = y + dy * distance, x + dx * distance
                        if 0 <= yy < 12 and 0 <= xx < 12 and roi[y, x] and roi[yy, xx]:
                            ref[quant[y, x], quant[yy, xx]] += 1
                ref = ref + ref.T
                if ref.sum():
                    ref /= ref.sum()
                got = glcm_matrix(quant, roi, levels, distance, angle,
                                  symmetric=True, normalized=True)
                assert np.allclose(got, ref, atol=1e-15)

    def test_matrices_symmetric_and_normalized(self, rng):
        for _ in range(5):
            pixels = rng.integers(0, 256, size=(20, 20), dtype=np.uint8)
            quant = quantize_levels(GrayImage(pixels), _full_roi((20, 20)), 16)
            mat = glcm_matrix(quant, np.ones((20, 20), dtype=bool), 16, 1, 45,
                              symmetric=True, normalized=True)
            assert abs(mat.sum() - 1.0) < 1e-12
            assert np.allclose(mat, mat.T)

    def test_feature_ranges(self, rng):
        for _ in range(5):
            pixels = rng.integers(0, 256, size=(24, 24), dtype=np.uint8)
            feats = haralick_features(GrayImage(pixels), _full_roi((24, 24)), GlcmConfig())
            assert feats.shape == (13,)
            assert np.all(np.isfinite(feats))
            assert 0.0 <= feats[0] <= 1.0   # ASM
            assert feats[1] >= 0.0          # contrast

    def test_transpose_with_0_and_90_angles(self, rng):
        pixels = rng.integers(0, 256, size=(15, 15), dtype=np.uint8)
        cfg = GlcmConfig(levels=16, distances=(1, 2), angles=(0, 90))
        a = haralick_features(GrayImage(pixels), _full_roi((15, 15)), cfg)
        b = haralick_features(GrayImage(pixels.T.copy()), _full_roi((15, 15)), cfg)
        assert np.allclose(a, b, atol=1e-12)

    def test_degenerate_roi(self):
        roi = np.zeros((8, 8), dtype=np.uint8)
        roi[2, 2] = 1  # single pixel: no co-occurring pair at any offset
        with pytest.raises(DegenerateRoiError):
            haralick_features(GrayImage(np.zeros((8, 8), dtype=np.uint8)),
                              BinaryMask(roi), GlcmConfig())


# --- LDP ------------------------------------------------------------------

_KIRSCH_REF = [
    np.array([[-3, -3, 5], [-3, 0, 5], [-3, -3, 5]]),       # E
    np.array([[-3, -3, -3], [-3, 0, 5], [-3, 5, 5]]),       # SE
    np.array([[-3, -3, -3], [-3, 0, -3], [5, 5, 5]]),       # S
    np.array([[-3, -3, -3], [5, 0, -3], [5, 5, -3]]),       # SW
    np.array([[5, -3, -3], [5, 0, -3], [5, -3, -3]]),       # W
    np.array([[5, 5, -3], [5, 0, -3], [-3, -3, -3]]),       # NW
    np.array([[5, 5, 5], [-3, 0, -3], [-3, -3, -3]]),       # N
    np.array([[-3, 5, 5], [-3, 0, 5], [-3, -3, -3]]),       # NE
]


def _ldp_ref(gray: np.ndarray, roi: np.ndarray, k: int) -> np.ndarray:
    legal = [c for c in range(256) if bin(c).count("1") == k]
    hist = np.zeros(len(legal))
    h, w = gray.shape
    for y in range(1, h - 1):
        for x in range(1, w - 1):
            if not roi[y, x]:
                continue
            window = gray[y - 1:y + 2, x - 1:x + 2].astype(float)
            resp = [float((window * m).sum()) for m in _KIRSCH_REF]
            ranked = sorted(range(8), key=lambda i: (-abs(resp[i]), i))[:k]
            code = sum(1 << i for i in ranked)
            hist[legal.index(code)] += 1
    return hist / hist.sum()


class TestLdp:
    def test_dim_and_normalization(self, rng):
        pixels = rng.integers(0, 256, size=(20, 20), dtype=np.uint8)
        hist = ldp_features(GrayImage(pixels), _full_roi((20, 20)), 3)
        assert hist.shape == (56,)
        assert abs(hist.sum() - 1.0) < 1e-12
        assert np.all(hist >= 0)

    def test_constant_image_single_bin(self):
        gray = GrayImage(np.full((10, 10), 50, dtype=np.uint8))
        hist = ldp_features(gray, _full_roi((10, 10)), 3)
        # All responses tie at 0, so masks 0..2 win and code 0b111 is the
        # smallest 3-bit code, landing in bin 0.
        assert hist[0] == 1.0
        assert hist[1:].sum() == 0.0

    def test_matches_scalar_reference(self, rng):
        pixels = rng.integers(0, 256, size=(14, 14), dtype=np.uint8)
        roi = (rng.random((14, 14)) > 0.2).astype(np.uint8)
        for k in (1, 3, 5):
            got = ldp_features(GrayImage(pixels), BinaryMask(roi), k)
            assert np.allclose(got, _ldp_ref(pixels, roi, k), atol=1e-15)
            assert got.shape == (comb(8, k),)

    def test_invalid_k(self):
        gray = GrayImage(np.zeros((8, 8), dtype=np.uint8))
        for k in (0, 8):
            with pytest.raises(InvalidKError):
                ldp_features(gray, _full_roi((8, 8)), k)

    def test_no_interior_pixel(self):
        roi = np.zeros((8, 8), dtype=np.uint8)
        roi[0, :] = 1  # border only
        with pytest.raises(DegenerateRoiError):
            ldp_features(GrayImage(np.zeros((8, 8), dtype=np.uint8)), BinaryMask(roi), 3)


# --- color histogram ------------------------------------------------------

class TestColorHistogram:
    def test_uniform_red_single_bin(self):
        pixels = np.zeros((6, 6, 3), dtype=np.uint8)
        pixels[..., 0] = 255
        hist = color_histogram(RasterImage(pixels), _full_roi((6, 6)), 8)
        assert hist.shape == (512,)
        assert hist[7 * 64] == 1.0    # (r, g, b) bin (7, 0, 0), R-major layout
        assert hist.sum() == 1.0

    def test_two_pixel_roi(self):
        pixels = np.zeros((1, 2, 3), dtype=np.uint8)
        pixels[0, 0] = (255, 0, 0)
        pixels[0, 1] = (0, 255, 0)
        hist = color_histogram(RasterImage(pixels), _full_roi((1, 2)), 8)
        assert hist[7 * 64] == 0.5
        assert hist[7 * 8] == 0.5

    def test_position_free(self, rng):
        img = random_color_image(7, 16, 16)
        hist1 = color_histogram(img, _full_roi((16, 16)), 8)
        flat = img.pixels.reshape(-1, 3)
        perm = rng.permutation(flat.shape[0])
        shuffled = RasterImage(flat[perm].reshape(16, 16, 3))
        hist2 = color_histogram(shuffled, _full_roi((16, 16)), 8)
        assert np.array_equal(hist1, hist2)

    def test_roi_only_pixels_counted(self):
        pixels = np.zeros((2, 2, 3), dtype=np.uint8)
        pixels[0, 0] = 255
        roi = np.zeros((2, 2), dtype=np.uint8)
        roi[0, 0] = 1
        hist = color_histogram(RasterImage(pixels), BinaryMask(roi), 8)
        assert hist[7 * 64 + 7 * 8 + 7] == 1.0

    def test_errors(self):
        gray = RasterImage(np.zeros((4, 4, 1), dtype=np.uint8))
        with pytest.raises(NotColorImageError):
            color_histogram(gray, _full_roi((4, 4)), 8)
        color = RasterImage(np.zeros((4, 4, 3), dtype=np.uint8))
        with pytest.raises(EmptyRoiError):
            color_histogram(color, BinaryMask(np.zeros((4, 4), dtype=np.uint8)), 8)


# --- extract_all ------------------------------------------------------------

class TestExtractAll:
    def test_block_order_and_total_dim(self):
        img = random_color_image(12, 64, 64)
        mask = random_blob_mask(4, size=64, margin=8)
        blocks = extract_all(img, mask, FeatureParams())
        assert [b.block_name for b in blocks] == ["hu", "zernike", "haralick",
                                                  "ldp", "color_hist"]
        assert [b.dim for b in blocks] == [7, 25, 13, 56, 512]
        assert sum(b.dim for b in blocks) == 613

    def test_deterministic(self):
        img = random_color_image(3, 48, 48)
        mask = random_blob_mask(6, size=48, margin=6)
        a = extract_all(img, mask)
        b = extract_all(img, mask)
        for block_a, block_b in zip(a, b):
            assert np.array_equal(block_a.values, block_b.values)

    def test_empty_mask_propagates(self):
        img = random_color_image(1, 32, 32)
        with pytest.raises(EmptyRoiError):
            extract_all(img, BinaryMask(np.zeros((32, 32), dtype=np.uint8)))

    def test_feature_vector_rejects_nan(self):
        with pytest.raises(ValueError):
            FeatureVector("hu", np.array([1.0, np.nan]))
        with pytest.raises(ValueError):
            FeatureVector("bogus", np.array([1.0]))
