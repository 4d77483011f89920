"""Synthetic five-class fundus-like dataset for tests and benchmarks.

Classes are separable by construction: the grade index raises both the
count of bright lesion blobs inside the disc and the spatial frequency of
a sinusoidal texture, the two signals the handcrafted descriptors react to.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .dataset import CLASS_NAMES
from .imaging import RasterImage, save_png

SIZE = 224
BASE_COLOR = np.array([182, 92, 38], dtype=np.float64)
BLOB_COLOR = np.array([238, 196, 112], dtype=np.float64)
CLASS_CYCLES = (2.0, 4.0, 8.0, 16.0, 32.0)
CLASS_BLOBS = (5, 40, 8, 80, 20)


def make_class_image(class_index: int, rng: np.random.Generator) -> RasterImage:
    """One 224x224 RGB sample of the requested severity grade."""
    yy, xx = np.mgrid[0:SIZE, 0:SIZE].astype(np.float64)
    cx = SIZE / 2 + rng.uniform(-4, 4)
    cy = SIZE / 2 + rng.uniform(-4, 4)
    radius = rng.uniform(86, 91)
    disc = (xx - cx) ** 2 + (yy - cy) ** 2 <= radius ** 2

    img = np.zeros((SIZE, SIZE, 3), dtype=np.float64)
    img += rng.uniform(0, 4, size=(SIZE, SIZE, 1))          # sensor noise floor
    img[disc] = BASE_COLOR + rng.normal(0, 3, size=(int(disc.sum()), 3))

    # Texture frequency doubles with each grade; blob count zigzags so the
    # five (frequency, count) pairs are mutually extreme rather than nested.
    angle = rng.uniform(0, np.pi)
    cycles = CLASS_CYCLES[class_index] + rng.uniform(-0.2, 0.2)
    wave = np.sin(2 * np.pi * cycles / SIZE
                  * (np.cos(angle) * xx + np.sin(angle) * yy)
                  + rng.uniform(0, 2 * np.pi))
    img[disc] += (38.0 * wave[disc])[:, None]

    n_blobs = CLASS_BLOBS[class_index] + rng.integers(0, 3)
    for _ in range(int(n_blobs)):
        theta = rng.uniform(0, 2 * np.pi)
        rad = rng.uniform(0, radius * 0.82)
        bx, by = cx + rad * np.cos(theta), cy + rad * np.sin(theta)
        br = rng.uniform(4.5, 7.0)
        blob = (xx - bx) ** 2 + (yy - by) ** 2 <= br ** 2
        img[blob] = BLOB_COLOR + rng.normal(0, 3, size=(int(blob.sum()), 3))

    return RasterImage(np.clip(img, 0, 255).astype(np.uint8))


def generate_dataset(root: str | Path, per_class: int = 100, seed: int = 42) -> Path:
    """Write per_class PNGs into each of the five class directories."""
    root = Path(root)
    for class_index, name in enumerate(CLASS_NAMES):
        out_dir = root / name
        out_dir.mkdir(parents=True, exist_ok=True)
        for i in range(per_class):
            rng = np.random.default_rng([seed, class_index, i])
            image = make_class_image(class_index, rng)
            save_png(image, out_dir / f"sample_{i:04d}.png")
    return root
