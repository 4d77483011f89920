"""Dataset ingestion, manifest persistence and the raw-feature cache.

The cache (magic FFC1) stores pre-standardization fused vectors keyed by a
fingerprint of every extraction parameter, so grid reruns skip extraction
whenever the configuration is unchanged.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .deep import FeatureProvider
from .errors import (
    CacheCorruptError,
    EmptyDatasetError,
    EmptyRoiError,
    FundusFuseError,
    MissingClassDirectoryError,
)
from .fusion import concat
from .handcrafted import FeatureParams, FeatureVector, extract_all
from .imaging import expand_to_color, load_image, resize_bilinear
from .segmentation import SegmentationConfig, full_mask, segment

log = logging.getLogger(__name__)

CLASS_NAMES = ("No_DR", "Mild", "Moderate", "Severe", "Proliferative_DR")
IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")
CACHE_MAGIC = b"FFC1"
CANVAS = 224


@dataclass(frozen=True)
class ManifestRecord:
    id: int
    path: str          # POSIX-style, relative to the dataset root
    class_index: int
    class_name: str


@dataclass(frozen=True)
class DatasetManifest:
    records: tuple[ManifestRecord, ...]
    root: Path

    def labels(self) -> dict[int, int]:
        return {r.id: r.class_index for r in self.records}

    def absolute_path(self, record: ManifestRecord) -> Path:
        return self.root / record.path


def _is_decodable(path: Path) -> bool:
    try:
        with Image.open(path) as im:
            im.verify()
        return True
    except (UnidentifiedImageError, OSError, SyntaxError):
        return False


def ingest(root: str | Path) -> DatasetManifest:
    """Enumerate every decodable image under the five class directories.

    Records are sorted by (class, byte-wise filename) so ids are stable
    across machines; undecodable files are logged and skipped.
    """
    root = Path(root)
    for name in CLASS_NAMES:
        if not (root / name).is_dir():
            raise MissingClassDirectoryError(f"missing class directory {name!r} under {root}")

    records: list[ManifestRecord] = []
    next_id = 0
    for class_index, name in enumerate(CLASS_NAMES):
        entries = sorted(
            (p for p in (root / name).iterdir()
             if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES),
            key=lambda p: p.name.encode("utf-8"))
        for path in entries:
            if not _is_decodable(path):
                log.warning("skipping undecodable file %s", path)
                continue
            records.append(ManifestRecord(
                id=next_id,
                path=f"{name}/{path.name}",
                class_index=class_index,
                class_name=name,
            ))
            next_id += 1
    if not records:
        raise EmptyDatasetError(f"no decodable image under {root}")
    return DatasetManifest(records=tuple(records), root=root)


def write_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    lines = ["id,path,class_index,class_name"]
    lines += [f"{r.id},{r.path},{r.class_index},{r.class_name}"
              for r in manifest.records]
    Path(path).write_text("\n".join(lines) + "\n")


def read_manifest(path: str | Path, root: str | Path | None = None) -> DatasetManifest:
    """Relative record paths resolve against `root`, defaulting to the
    manifest file's own directory."""
    path = Path(path)
    records = []
    lines = path.read_text().splitlines()
    for line in lines[1:]:
        if not line.strip():
            continue
        rid, rel, class_index, class_name = line.split(",")
        records.append(ManifestRecord(int(rid), rel, int(class_index), class_name))
    return DatasetManifest(records=tuple(records),
                           root=Path(root) if root is not None else path.parent)


# --- extraction and caching --------------------------------------------------

def params_fingerprint(seg_cfg: SegmentationConfig, params: FeatureParams,
                       provider: FeatureProvider) -> bytes:
    """SHA-256 over every parameter that affects raw fused vectors."""
    payload = json.dumps({
        "format": 1,
        "segmentation": [seg_cfg.blur_kernel, seg_cfg.blur_sigma,
                         seg_cfg.block_size, seg_cfg.threshold_offset,
                         seg_cfg.opening_radius],
        "zernike_order": params.zernike_order,
        "glcm": [params.glcm.levels, list(params.glcm.distances),
                 list(params.glcm.angles), params.glcm.symmetric,
                 params.glcm.normalized],
        "ldp_k": params.ldp_k,
        "hist_bins": params.hist_bins,
        "provider": [provider.name, provider.output_dim],
    }, sort_keys=True).encode()
    return hashlib.sha256(payload).digest()


@dataclass(frozen=True)
class FeatureCache:
    fingerprint: bytes
    dim: int
    vectors: dict[int, np.ndarray]   # record id -> raw fused vector
    failed_ids: tuple[int, ...]


def extract_record(img_path: Path, seg_cfg: SegmentationConfig,
                   params: FeatureParams, provider: FeatureProvider) -> np.ndarray:
    """load -> resize -> segment -> handcrafted blocks -> deep embed -> concat."""
    img = expand_to_color(load_image(img_path))
    img = resize_bilinear(img, CANVAS, CANVAS)
    try:
        mask, masked = segment(img, seg_cfg)
    except EmptyRoiError:
        log.warning("%s: empty ROI, falling back to the full-image mask", img_path)
        mask = full_mask(img.width, img.height)
        masked = img
    blocks = extract_all(masked, mask, params)
    blocks.append(FeatureVector("deep", provider.embed(masked)))
    return concat(blocks)


def write_cache(cache: FeatureCache, path: str | Path) -> None:
    """Single-writer atomic write; readers never see partial files."""
    out = bytearray(CACHE_MAGIC)
    out += cache.fingerprint
    out += struct.pack("<III", cache.dim, len(cache.vectors), len(cache.failed_ids))
    for rid in cache.failed_ids:
        out += struct.pack("<I", rid)
    for rid in sorted(cache.vectors):
        out += struct.pack("<I", rid)
        out += cache.vectors[rid].astype("<f8").tobytes()
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(bytes(out))
    os.replace(tmp, path)


def read_cache(path: str | Path, expected_fingerprint: bytes | None = None) -> FeatureCache:
    data = Path(path).read_bytes()
    if data[:4] != CACHE_MAGIC:
        raise CacheCorruptError(f"{path}: bad magic, not a feature cache")
    fingerprint = data[4:36]
    if expected_fingerprint is not None and fingerprint != expected_fingerprint:
        raise CacheCorruptError(f"{path}: parameter fingerprint mismatch")
    dim, n_records, n_failed = struct.unpack_from("<III", data, 36)
    pos = 48
    failed = struct.unpack_from(f"<{n_failed}I", data, pos) if n_failed else ()
    pos += 4 * n_failed
    vectors: dict[int, np.ndarray] = {}
    stride = 4 + 8 * dim
    if len(data) != pos + n_records * stride:
        raise CacheCorruptError(f"{path}: truncated payload")
    for _ in range(n_records):
        rid = struct.unpack_from("<I", data, pos)[0]
        vec = np.frombuffer(data, dtype="<f8", count=dim, offset=pos + 4).copy()
        vectors[rid] = vec
        pos += stride
    return FeatureCache(fingerprint=fingerprint, dim=dim, vectors=vectors,
                        failed_ids=tuple(failed))


def extract_and_cache(manifest: DatasetManifest, provider: FeatureProvider,
                      seg_cfg: SegmentationConfig | None = None,
                      params: FeatureParams | None = None,
                      cache_path: str | Path | None = None,
                      jobs: int = 1) -> FeatureCache:
    """Extract raw fused vectors for every record, reusing a valid cache.

    A record that fails (undecodable, degenerate ROI descriptor) is marked
    failed and skipped; extraction errors never abort the run.
    """
    seg_cfg = seg_cfg or SegmentationConfig()
    params = params or FeatureParams()
    fingerprint = params_fingerprint(seg_cfg, params, provider)

    if cache_path is not None and Path(cache_path).exists():
        try:
            cached = read_cache(cache_path, fingerprint)
            wanted = {r.id for r in manifest.records}
            if wanted == set(cached.vectors) | set(cached.failed_ids):
                return cached
            log.info("cache %s covers a different record set, rebuilding", cache_path)
        except CacheCorruptError as exc:
            log.warning("ignoring stale cache: %s", exc)

    def run_one(record: ManifestRecord):
        try:
            return record.id, extract_record(manifest.absolute_path(record),
                                             seg_cfg, params, provider), None
        except (FundusFuseError, FileNotFoundError) as exc:
            return record.id, None, exc

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_one, manifest.records))
    else:
        results = [run_one(r) for r in manifest.records]

    vectors: dict[int, np.ndarray] = {}
    failed: list[int] = []
    for rid, vec, exc in sorted(results, key=lambda item: item[0]):
        if vec is None:
            log.warning("record %d failed: %s", rid, exc)
            failed.append(rid)
        else:
            vectors[rid] = vec
    if not vectors:
        raise EmptyDatasetError("every record failed extraction")
    dims = {v.shape[0] for v in vectors.values()}
    if len(dims) != 1:
        raise CacheCorruptError(f"inconsistent vector dims {sorted(dims)}")

    cache = FeatureCache(fingerprint=fingerprint, dim=dims.pop(),
                         vectors=vectors, failed_ids=tuple(failed))
    if cache_path is not None:
        write_cache(cache, cache_path)
    return cache
