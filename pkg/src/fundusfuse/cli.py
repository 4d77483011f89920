"""Command-line pipeline: ingest, segment, extract, train, evaluate, grid.

Every parameter the pipeline depends on is exposed as a flag and echoed
into the output directory, so a run is reproducible from its config file
plus the dataset. Exit codes: 0 success, 1 partial failures, 2 usage or
configuration errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dataset as dataset_io
from .classifiers import TrainConfig, load_model, resolve_kind, save_model, train_model
from .dataset import CANVAS
from .deep import FeatureProvider, model_file_provider, parse_sidecar, seeded_projection_provider
from .errors import EmptyRoiError, FundusFuseError
from .evaluation import (
    confusion,
    metrics,
    run_grid,
    stratified_split,
    write_grid_outputs,
)
from .fusion import FusedSample, apply_standardizer, fit_standardizer
from .handcrafted import FeatureParams, GlcmConfig
from .imaging import expand_to_color, load_image, resize_bilinear, save_png
from .segmentation import SegmentationConfig, full_mask, mask_to_image, segment

log = logging.getLogger(__name__)

DEFAULT_PROVIDER = "stub:42:64"
DEFAULT_CLASSIFIERS = "knn,svm,rf,ada,gb"


@dataclass
class RunConfig:
    """Flat record of every tunable; serializes to key = value lines."""

    seed: int = 42
    jobs: int = 1
    train_frac: float = 0.8
    blur_kernel: int = 5
    blur_sigma: float = 1.0
    block_size: int = 51
    threshold_offset: float = 2.0
    opening_radius: int = 2
    zernike_order: int = 8
    glcm_levels: int = 32
    glcm_distances: str = "1,2"
    glcm_angles: str = "0,45,90,135"
    ldp_k: int = 3
    hist_bins: int = 8
    knn_k: int = 5
    svm_lambda: float = 1e-4
    svm_epochs: int = 50
    rf_trees: int = 200
    rf_max_depth: int = 16
    rf_feature_frac: str = "sqrt"
    ada_stages: int = 100
    gb_stages: int = 100
    gb_learning_rate: float = 0.1
    providers: str = DEFAULT_PROVIDER
    classifiers: str = DEFAULT_CLASSIFIERS
    output_dir: str = "runs"

    def segmentation(self) -> SegmentationConfig:
        return SegmentationConfig(
            blur_kernel=self.blur_kernel, blur_sigma=self.blur_sigma,
            block_size=self.block_size, threshold_offset=self.threshold_offset,
            opening_radius=self.opening_radius)

    def features(self) -> FeatureParams:
        return FeatureParams(
            zernike_order=self.zernike_order,
            glcm=GlcmConfig(
                levels=self.glcm_levels,
                distances=tuple(int(d) for d in self.glcm_distances.split(",")),
                angles=tuple(int(a) for a in self.glcm_angles.split(","))),
            ldp_k=self.ldp_k, hist_bins=self.hist_bins)

    def training(self) -> TrainConfig:
        frac = self.rf_feature_frac
        return TrainConfig(
            knn_k=self.knn_k, svm_lambda=self.svm_lambda,
            svm_epochs=self.svm_epochs, rf_trees=self.rf_trees,
            rf_max_depth=self.rf_max_depth,
            rf_feature_frac=frac if frac == "sqrt" else float(frac),
            ada_stages=self.ada_stages, gb_stages=self.gb_stages,
            gb_learning_rate=self.gb_learning_rate, seed=self.seed)

    def to_file(self, path: str | Path) -> None:
        lines = [f"{f.name} = {getattr(self, f.name)}"
                 for f in dataclasses.fields(self)]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        values: dict = {}
        known = {f.name for f in dataclasses.fields(cls)}
        for raw in Path(path).read_text().splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise FundusFuseError(f"{path}: bad config line {raw!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in known:
                raise FundusFuseError(f"{path}: unknown config key {key!r}")
            values[key] = _coerce(cls, key, value)
        return cls(**values)


def _coerce(cls, key: str, value: str):
    default = getattr(cls(), key)
    if isinstance(default, bool):
        return value.lower() in ("1", "true", "yes")
    if isinstance(default, int):
        return int(value)
    if isinstance(default, float):
        return float(value)
    return value


def provider_from_spec(spec: str) -> FeatureProvider:
    """Build a provider from 'stub[:seed[:dim]]' or a model-file path.

    A model path may carry an explicit ':DIM' suffix; otherwise the sidecar
    metadata must declare output_dim.
    """
    if spec == "stub" or spec.startswith("stub:"):
        parts = spec.split(":")
        seed = int(parts[1]) if len(parts) > 1 else 42
        dim = int(parts[2]) if len(parts) > 2 else 64
        return seeded_projection_provider(seed, dim)
    path, dim = spec, None
    if ":" in spec:
        head, tail = spec.rsplit(":", 1)
        if tail.isdigit() and not Path(spec).exists():
            path, dim = head, int(tail)
    if dim is None:
        meta_path = Path(path).with_name(Path(path).name + ".meta")
        if meta_path.exists():
            dim = parse_sidecar(meta_path).get("output_dim")
    if dim is None:
        raise FundusFuseError(
            f"provider {spec!r}: embedding size unknown; append ':DIM' or "
            f"declare output_dim in the sidecar metadata")
    return model_file_provider(path, dim)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key = value configuration file")
    for field in dataclasses.fields(RunConfig):
        flag = "--" + field.name.replace("_", "-")
        parser.add_argument(flag, dest=field.name, default=None)


def _build_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    for field in dataclasses.fields(RunConfig):
        override = getattr(args, field.name, None)
        if override is not None:
            setattr(cfg, field.name, _coerce(RunConfig, field.name, str(override)))
    return cfg


def _load_manifest(args) -> dataset_io.DatasetManifest:
    return dataset_io.read_manifest(args.manifest, root=args.root)


def _build_caches(manifest, cfg: RunConfig, cache_dir: str | None,
                  provider_specs: list[str]):
    caches = {}
    for spec in provider_specs:
        provider = provider_from_spec(spec)
        cache_path = None
        if cache_dir is not None:
            Path(cache_dir).mkdir(parents=True, exist_ok=True)
            cache_path = Path(cache_dir) / f"features_{provider.name}.ffc"
        caches[provider.name] = dataset_io.extract_and_cache(
            manifest, provider, cfg.segmentation(), cfg.features(),
            cache_path, jobs=cfg.jobs)
    return caches


def _train_samples(cache, labels, ids):
    return [FusedSample(cache.vectors[i], labels[i], str(i))
            for i in ids if i in cache.vectors]


def cmd_ingest(args) -> int:
    manifest = dataset_io.ingest(args.root_dir)
    out = Path(args.out) if args.out else Path(args.root_dir) / "manifest.csv"
    dataset_io.write_manifest(manifest, out)
    print(f"wrote {len(manifest.records)} records to {out}")
    return 0


def cmd_segment(args) -> int:
    cfg = _build_config(args)
    manifest = _load_manifest(args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    failures = 0
    for record in manifest.records:
        try:
            img = load_image(manifest.absolute_path(record))
            img = expand_to_color(img)
            img = resize_bilinear(img, CANVAS, CANVAS)
            try:
                mask, _ = segment(img, cfg.segmentation())
            except EmptyRoiError:
                log.warning("record %d: empty ROI, writing full-mask fallback", record.id)
                mask = full_mask(img.width, img.height)
            save_png(mask_to_image(mask), out_dir / f"mask_{record.id:05d}.png")
        except (FundusFuseError, FileNotFoundError) as exc:
            log.warning("record %d failed: %s", record.id, exc)
            failures += 1
    cfg.to_file(out_dir / "run_config.txt")
    print(f"wrote {len(manifest.records) - failures} masks to {out_dir}")
    return 1 if failures else 0


def cmd_extract(args) -> int:
    cfg = _build_config(args)
    manifest = _load_manifest(args)
    provider = provider_from_spec(args.provider or cfg.providers.split(",")[0])
    cache = dataset_io.extract_and_cache(
        manifest, provider, cfg.segmentation(), cfg.features(),
        args.cache, jobs=cfg.jobs)
    print(f"extracted {len(cache.vectors)} vectors of dim {cache.dim}"
          + (f", {len(cache.failed_ids)} failed" if cache.failed_ids else ""))
    return 1 if cache.failed_ids else 0


def _split_ids(manifest, cfg: RunConfig):
    ordered = sorted(manifest.labels())
    labels = manifest.labels()
    train_pos, val_pos = stratified_split([labels[i] for i in ordered],
                                          cfg.train_frac, cfg.seed)
    return [ordered[p] for p in train_pos], [ordered[p] for p in val_pos]


def cmd_train(args) -> int:
    cfg = _build_config(args)
    manifest = _load_manifest(args)
    resolve_kind(args.classifier)
    provider = provider_from_spec(args.provider or cfg.providers.split(",")[0])
    cache = dataset_io.extract_and_cache(
        manifest, provider, cfg.segmentation(), cfg.features(),
        args.cache, jobs=cfg.jobs)
    labels = manifest.labels()
    train_ids, _ = _split_ids(manifest, cfg)
    train = _train_samples(cache, labels, train_ids)
    standardizer = fit_standardizer(train)
    std_train = [FusedSample(apply_standardizer(standardizer, s.features),
                             s.label, s.source_id) for s in train]
    model = train_model(args.classifier, std_train, cfg.training())
    save_model(model, args.model_out)
    print(f"trained {model.kind} on {len(std_train)} samples -> {args.model_out}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _build_config(args)
    manifest = _load_manifest(args)
    provider = provider_from_spec(args.provider or cfg.providers.split(",")[0])
    cache = dataset_io.extract_and_cache(
        manifest, provider, cfg.segmentation(), cfg.features(),
        args.cache, jobs=cfg.jobs)
    labels = manifest.labels()
    train_ids, val_ids = _split_ids(manifest, cfg)
    train = _train_samples(cache, labels, train_ids)
    standardizer = fit_standardizer(train)
    model = load_model(args.model)
    val = [(i, apply_standardizer(standardizer, cache.vectors[i]))
           for i in val_ids if i in cache.vectors]
    preds = model.predict_batch(np.stack([v for _, v in val]))
    cm = confusion(np.array([labels[i] for i, _ in val]), preds)
    report = metrics(cm)
    text = json.dumps(report.to_dict(), sort_keys=True, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return 0


def cmd_grid(args) -> int:
    cfg = _build_config(args)
    manifest = _load_manifest(args)
    classifier_names = [c.strip() for c in cfg.classifiers.split(",") if c.strip()]
    for name in classifier_names:
        resolve_kind(name)
    provider_specs = [p.strip() for p in cfg.providers.split(",") if p.strip()]
    caches = _build_caches(manifest, cfg, args.cache_dir, provider_specs)

    feature_sets = {name: cache.vectors for name, cache in caches.items()}
    cells = run_grid(feature_sets, manifest.labels(), classifier_names,
                     cfg.training(), cfg.train_frac)
    out_dir = Path(args.out_dir)
    write_grid_outputs(cells, out_dir)
    cfg.to_file(out_dir / "run_config.txt")
    failed = [c for c in cells if c.report is None]
    skipped = any(cache.failed_ids for cache in caches.values())
    print(f"grid complete: {len(cells) - len(failed)}/{len(cells)} cells -> {out_dir}")
    return 1 if failed or skipped else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fundusfuse",
        description="Five-grade fundus image classification via fused "
                    "handcrafted and deep features.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="scan a class-directory tree into a manifest")
    p.add_argument("root_dir")
    p.add_argument("--out", help="manifest CSV path (default <root>/manifest.csv)")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("segment", help="write one ROI mask PNG per record")
    p.add_argument("manifest")
    p.add_argument("--root", default=None)
    p.add_argument("--out-dir", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("extract", help="build the raw feature cache")
    p.add_argument("manifest")
    p.add_argument("--root", default=None)
    p.add_argument("--provider", default=None)
    p.add_argument("--cache", default=None, help="cache file to reuse or create")
    _add_common(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="fit one classifier on the train split")
    p.add_argument("manifest")
    p.add_argument("--root", default=None)
    p.add_argument("--provider", default=None)
    p.add_argument("--classifier", required=True)
    p.add_argument("--cache", default=None)
    p.add_argument("--model-out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a saved model on the validation split")
    p.add_argument("manifest")
    p.add_argument("--root", default=None)
    p.add_argument("--provider", default=None)
    p.add_argument("--model", required=True)
    p.add_argument("--cache", default=None)
    p.add_argument("--out", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("grid", help="evaluate every backbone x classifier cell")
    p.add_argument("manifest")
    p.add_argument("--root", default=None)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--cache-dir", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_grid)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FundusFuseError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
