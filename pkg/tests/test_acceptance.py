"""Acceptance suite: one test per release criterion, each printing a
pass/fail line. Tolerances and runtime bounds are asserted inline."""

import json
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import random_blob_mask
from fundusfuse.cli import main
from fundusfuse.classifiers import TrainConfig, train_model
from fundusfuse.dataset import CLASS_NAMES, extract_and_cache, ingest
from fundusfuse.deep import seeded_projection_provider
from fundusfuse.errors import DegenerateRoiError, EmptyRoiError
from fundusfuse.evaluation import confusion, metrics, stratified_split
from fundusfuse.fusion import FusedSample, apply_standardizer, fit_standardizer
from fundusfuse.handcrafted.glcm import GlcmConfig, glcm_matrix, haralick_features, quantize_levels
from fundusfuse.handcrafted.hu import hu_moments
from fundusfuse.handcrafted.ldp import ldp_features
from fundusfuse.handcrafted.colorhist import color_histogram
from fundusfuse.handcrafted.zernike import zernike_moments
from fundusfuse.imaging import GrayImage, RasterImage, save_png
from fundusfuse.segmentation import BinaryMask, SegmentationConfig, segment
from fundusfuse.synthetic import generate_dataset
from test_evaluation import metrics_ref


def criterion(label):
    def mark(fn):
        fn._criterion = label
        return fn
    return mark


# ---------------------------------------------------------------- criterion 1

@criterion("01 split protocol 2898/724")
def test_criterion_01_split_protocol():
    started = time.perf_counter()
    counts = [1805, 370, 999, 193, 255]          # 3,622 records over 5 grades
    labels = np.repeat(np.arange(5), counts)
    train, val = stratified_split(labels, 0.8, seed=42)
    assert len(train) == 2898
    assert len(val) == 724
    assert not set(train) & set(val)
    assert sorted(train + val) == list(range(3622))
    train_labels = labels[np.array(train)]
    for c, n_c in enumerate(counts):
        assert abs(int((train_labels == c).sum()) - 0.8 * n_c) <= 1.0
    assert time.perf_counter() - started < 1.0


# ---------------------------------------------------------------- criterion 2

@criterion("02 metric oracle equivalence, 1000 matrices")
def test_criterion_02_metric_oracle_equivalence():
    started = time.perf_counter()
    rng = np.random.default_rng(7)
    checked = 0
    while checked < 1000:
        cm = rng.integers(0, 50, size=(5, 5))
        if cm.sum() == 0:
            continue
        checked += 1
        got = metrics(cm)
        ref = metrics_ref(cm.tolist())
        assert abs(got.accuracy - ref["accuracy"]) < 1e-12
        assert abs(got.precision_macro - ref["precision_macro"]) < 1e-12
        assert abs(got.recall_macro - ref["recall_macro"]) < 1e-12
        assert abs(got.f1_macro - ref["f1_macro"]) < 1e-12
        assert abs(got.kappa - ref["kappa"]) < 1e-12
        assert got.recall_micro == got.accuracy
        assert got.precision_micro == got.accuracy
        assert got.f1_micro == got.accuracy
    assert time.perf_counter() - started < 5.0


# ---------------------------------------------------------------- criterion 3

@criterion("03 kappa anchors")
def test_criterion_03_kappa_anchors():
    assert metrics(np.diag([3, 9, 4, 6, 2])).kappa == 1.0
    rng = np.random.default_rng(11)
    for _ in range(20):
        a = rng.integers(1, 9, size=5)
        b = rng.integers(1, 9, size=5)
        assert abs(metrics(np.outer(a, b)).kappa) < 1e-12
    assert metrics(np.array([[50, 10], [5, 35]])).kappa == pytest.approx(0.6939, abs=1e-4)


# ---------------------------------------------------------------- criterion 4

@criterion("04 moment invariance, 50 masks")
def test_criterion_04_moment_invariance():
    started = time.perf_counter()
    for seed in range(50):
        mask = random_blob_mask(seed)
        hu = hu_moments(mask)
        shifted = BinaryMask(np.roll(mask.pixels, (11, -9), axis=(0, 1)))
        assert np.allclose(hu, hu_moments(shifted), atol=1e-9)
        rotated = BinaryMask(np.ascontiguousarray(np.rot90(mask.pixels)))
        assert np.allclose(hu, hu_moments(rotated), atol=1e-2)
        zern = zernike_moments(mask, 8)
        assert np.allclose(zern, zernike_moments(rotated, 8), rtol=1e-6)
    assert time.perf_counter() - started < 30.0


# ---------------------------------------------------------------- criterion 5

@criterion("05 GLCM anchors")
def test_criterion_05_glcm_anchors():
    full = BinaryMask(np.ones((12, 12), dtype=np.uint8))
    feats = haralick_features(GrayImage(np.full((12, 12), 99, dtype=np.uint8)),
                              full, GlcmConfig())
    assert feats[1] == 0.0    # contrast
    assert feats[0] == 1.0    # angular second moment
    assert feats[8] == 0.0    # entropy

    checker = GrayImage(np.array([[0, 1], [1, 0]], dtype=np.uint8))
    cfg = GlcmConfig(levels=2, distances=(1,), angles=(0,))
    feats = haralick_features(checker, BinaryMask(np.ones((2, 2), dtype=np.uint8)), cfg)
    assert feats[1] == 1.0
    assert feats[0] == 0.5

    rng = np.random.default_rng(3)
    for _ in range(20):
        pixels = rng.integers(0, 256, size=(24, 24), dtype=np.uint8)
        roi = np.ones((24, 24), dtype=bool)
        quant = quantize_levels(GrayImage(pixels),
                                BinaryMask(roi.astype(np.uint8)), 32)
        for angle in (0, 45, 90, 135):
            mat = glcm_matrix(quant, roi, 32, 1, angle, True, True)
            assert np.array_equal(mat, mat.T)
            assert abs(mat.sum() - 1.0) < 1e-12


# ---------------------------------------------------------------- criterion 6

@criterion("06 histogram normalization, 100 images")
def test_criterion_06_histogram_normalization():
    rng = np.random.default_rng(5)
    full = BinaryMask(np.ones((32, 32), dtype=np.uint8))
    for _ in range(100):
        gray = GrayImage(rng.integers(0, 256, size=(32, 32), dtype=np.uint8))
        ldp = ldp_features(gray, full, 3)
        assert ldp.shape == (56,)
        assert abs(ldp.sum() - 1.0) < 1e-12
        color = RasterImage(rng.integers(0, 256, size=(32, 32, 3), dtype=np.uint8))
        hist = color_histogram(color, full, 8)
        assert hist.shape == (512,)
        assert abs(hist.sum() - 1.0) < 1e-12


# ---------------------------------------------------------------- criterion 7

@pytest.fixture(scope="module")
def synthetic_benchmark(tmp_path_factory):
    started = time.perf_counter()
    root = tmp_path_factory.mktemp("bench") / "synth500"
    generate_dataset(root, per_class=100, seed=42)
    manifest = ingest(root)
    cache = extract_and_cache(manifest, seeded_projection_provider(42, 64), jobs=4)
    return manifest, cache, started


@criterion("07 end-to-end synthetic benchmark")
def test_criterion_07_synthetic_benchmark(synthetic_benchmark):
    manifest, cache, started = synthetic_benchmark
    labels = manifest.labels()
    ids = sorted(labels)
    train_pos, val_pos = stratified_split([labels[i] for i in ids], 0.8, 42)
    train_ids = [ids[p] for p in train_pos]
    val_ids = [ids[p] for p in val_pos]
    assert len(train_ids) == 400 and len(val_ids) == 100

    def score_all(vectors):
        train = [FusedSample(vectors[i], labels[i]) for i in train_ids]
        standardizer = fit_standardizer(train)
        std_train = [FusedSample(apply_standardizer(standardizer, s.features),
                                 s.label) for s in train]
        V = np.stack([apply_standardizer(standardizer, vectors[i]) for i in val_ids])
        y_val = np.array([labels[i] for i in val_ids])
        scores = {}
        for kind in ("knn", "svm", "rf", "ada", "gb"):
            model = train_model(kind, std_train, TrainConfig())
            cm = confusion(y_val, model.predict_batch(V))
            scores[kind] = metrics(cm).accuracy
        return scores

    hybrid = score_all(cache.vectors)
    deep_only = score_all({i: v[-64:] for i, v in cache.vectors.items()})

    assert hybrid["rf"] >= 0.90
    for kind in ("knn", "svm", "ada", "gb"):
        assert hybrid[kind] >= 0.80, f"{kind} reached only {hybrid[kind]:.3f}"
    for kind in hybrid:
        assert hybrid[kind] >= deep_only[kind], \
            f"hybrid {kind} {hybrid[kind]:.3f} < deep-only {deep_only[kind]:.3f}"
    assert time.perf_counter() - started < 300.0


# ------------------------------------------------------- criteria 8 and 9

@pytest.fixture(scope="module")
def twin_pipeline_runs(tmp_path_factory):
    """The same small pipeline executed twice into separate directories."""
    base = tmp_path_factory.mktemp("twin")
    data_root = base / "data"
    generate_dataset(data_root, per_class=4, seed=9)
    outs = []
    for tag in ("a", "b"):
        out = base / tag
        out.mkdir()
        manifest_path = out / "manifest.csv"
        assert main(["ingest", str(data_root), "--out", str(manifest_path)]) == 0
        assert main(["extract", str(manifest_path), "--root", str(data_root),
                     "--provider", "stub:42:16",
                     "--cache", str(out / "features.ffc")]) == 0
        assert main(["train", str(manifest_path), "--root", str(data_root),
                     "--provider", "stub:42:16", "--cache", str(out / "features.ffc"),
                     "--classifier", "rf", "--rf-trees", "10",
                     "--model-out", str(out / "model.ffm")]) == 0
        assert main(["evaluate", str(manifest_path), "--root", str(data_root),
                     "--provider", "stub:42:16", "--cache", str(out / "features.ffc"),
                     "--model", str(out / "model.ffm"),
                     "--out", str(out / "report.json")]) == 0
        assert main(["grid", str(manifest_path), "--root", str(data_root),
                     "--providers", "stub:42:16,stub:7:8",
                     "--classifiers", "knn,svm,rf,ada,gb",
                     "--rf-trees", "10", "--ada-stages", "5", "--gb-stages", "5",
                     "--svm-epochs", "5", "--out-dir", str(out / "grid")]) == 0
        outs.append(out)
    return outs


@criterion("08 grid format and layout")
def test_criterion_08_grid_format(twin_pipeline_runs):
    out_a, out_b = twin_pipeline_runs
    grid = (out_a / "grid" / "grid.csv").read_text().splitlines()
    assert grid[0] == "backbone,classifier,accuracy,recall,precision,kappa,f1"
    assert len(grid) == 1 + 2 * 5
    assert grid[1].startswith("stub-42-16,knn,")
    for metric in ("accuracy", "recall", "precision", "kappa", "f1"):
        sheet = (out_a / "grid" / f"heatmap_{metric}.csv").read_text().splitlines()
        assert sheet[0] == "backbone,knn,svm,rf,ada,gb"
        assert sheet[1].startswith("stub-42-16,")
        assert sheet[2].startswith("stub-7-8,")
        twin = (out_b / "grid" / f"heatmap_{metric}.csv").read_bytes()
        assert (out_a / "grid" / f"heatmap_{metric}.csv").read_bytes() == twin
    assert (out_a / "grid" / "grid.csv").read_bytes() == \
        (out_b / "grid" / "grid.csv").read_bytes()


@criterion("09 pipeline determinism")
def test_criterion_09_determinism(twin_pipeline_runs):
    out_a, out_b = twin_pipeline_runs
    for name in ("manifest.csv", "features.ffc", "model.ffm", "report.json"):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes(), name
    cells_a = sorted(p.name for p in (out_a / "grid").glob("cell_*.json"))
    cells_b = sorted(p.name for p in (out_b / "grid").glob("cell_*.json"))
    assert cells_a == cells_b and len(cells_a) == 10
    for name in cells_a:
        assert (out_a / "grid" / name).read_bytes() == (out_b / "grid" / name).read_bytes()
    report = json.loads((out_a / "report.json").read_text())
    assert report["recall_micro"] == report["accuracy"]


# ---------------------------------------------------------------- criterion 10

@criterion("10 degenerate-image robustness")
def test_criterion_10_robustness(tmp_path, caplog):
    root = tmp_path / "weird"
    black = np.zeros((64, 64, 3), dtype=np.uint8)
    white = np.full((64, 64, 3), 255, dtype=np.uint8)
    single = np.zeros((64, 64, 3), dtype=np.uint8)
    single[31, 31] = 255
    one_by_one = np.full((1, 1, 3), 140, dtype=np.uint8)
    pictures = [black, white, single, one_by_one, black]
    for name, arr in zip(CLASS_NAMES, pictures):
        (root / name).mkdir(parents=True)
        save_png(RasterImage(arr), root / name / "img.png")
        save_png(RasterImage(arr), root / name / "img2.png")

    manifest = ingest(root)
    assert len(manifest.records) == 10

    # Default config: every degenerate image must survive extraction.
    cache = extract_and_cache(manifest, seeded_projection_provider(0, 8))
    assert len(cache.vectors) == 10
    assert not cache.failed_ids
    for vec in cache.vectors.values():
        assert np.all(np.isfinite(vec))

    # Negative offset empties every mask: the full-mask fallback must kick in
    # for all records instead of dropping them.
    with caplog.at_level("WARNING"):
        fallback = extract_and_cache(manifest, seeded_projection_provider(0, 8),
                                     SegmentationConfig(threshold_offset=-2.0))
    assert len(fallback.vectors) == 10
    assert any("empty ROI" in message for message in caplog.messages)

    # The degenerate-ROI error contracts underneath the fallback.
    with pytest.raises(EmptyRoiError):
        segment(RasterImage(black), SegmentationConfig(threshold_offset=-2.0))
    lone = np.zeros((16, 16), dtype=np.uint8)
    lone[8, 8] = 1
    with pytest.raises(DegenerateRoiError):
        haralick_features(GrayImage(np.zeros((16, 16), dtype=np.uint8)),
                          BinaryMask(lone), GlcmConfig())
    border = np.zeros((16, 16), dtype=np.uint8)
    border[0, :] = 1
    with pytest.raises(DegenerateRoiError):
        ldp_features(GrayImage(np.zeros((16, 16), dtype=np.uint8)),
                     BinaryMask(border), 3)
