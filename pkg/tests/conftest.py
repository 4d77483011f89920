import numpy as np
import pytest
from PIL import Image

from fundusfuse.dataset import CLASS_NAMES
from fundusfuse.imaging import RasterImage
from fundusfuse.segmentation import BinaryMask


def write_disk_image(path, seed=0, size=48):
    """Fundus-like test image: noisy dark field with a bright disc."""
    rng = np.random.default_rng(seed)
    base = np.zeros((size, size, 3), dtype=np.uint8)
    yy, xx = np.mgrid[0:size, 0:size]
    disk = (xx - size / 2) ** 2 + (yy - size / 2) ** 2 <= (size / 3) ** 2
    base[disk] = (180, 90, 40)
    base += rng.integers(0, 20, size=base.shape, dtype=np.uint8)
    Image.fromarray(base).save(path)


def make_tiny_dataset(root, counts=(2, 1, 1, 1, 1)):
    """Minimal ingestible tree with one image per record."""
    for name, count in zip(CLASS_NAMES, counts):
        (root / name).mkdir(parents=True)
        for i in range(count):
            write_disk_image(root / name / f"img_{i}.png", seed=hash((name, i)) % 1000)
    return root


def random_blob_mask(seed: int, size: int = 96, margin: int = 24) -> BinaryMask:
    """Irregular blob with a guaranteed clear border, so shifts stay in bounds."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    acc = np.zeros((size, size))
    for _ in range(4):
        cx = rng.uniform(margin + 4, size - margin - 4)
        cy = rng.uniform(margin + 4, size - margin - 4)
        sx = rng.uniform(0.04 * size, 0.09 * size)
        sy = rng.uniform(0.04 * size, 0.09 * size)
        acc += np.exp(-(((xx - cx) / sx) ** 2 + ((yy - cy) / sy) ** 2))
    mask = (acc > 0.45).astype(np.uint8)
    mask[:margin] = 0
    mask[-margin:] = 0
    mask[:, :margin] = 0
    mask[:, -margin:] = 0
    assert mask.sum() > 20
    return BinaryMask(mask)


def random_color_image(seed: int, w: int = 64, h: int = 64) -> RasterImage:
    rng = np.random.default_rng(seed)
    return RasterImage(rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when != "call":
        return
    label = getattr(item.function, "_criterion", None)
    if label:
        verdict = "PASS" if report.passed else "FAIL"
        print(f"\n[acceptance] {label}: {verdict}", flush=True)
