"""Deep-embedding providers behind one uniform interface.

Two implementations: a seeded random-projection stub that makes the whole
pipeline runnable without any neural model, and a loader for externally
exported CNN backbones in the ONNX interchange format with a sidecar
metadata file describing preprocessing.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np

from ..errors import (
    DimensionMismatchError,
    InputShapeUnsupportedError,
    InvalidDimError,
    ModelLoadError,
)
from ..imaging import RasterImage
from .onnx_exec import check_supported, run_graph
from .onnx_wire import Graph, load_graph

EMBED_SIZE = 224


class FeatureProvider:
    """Deterministic mapping from a 224x224x3 image to a flat real vector."""

    name: str
    output_dim: int

    def embed(self, img: RasterImage) -> np.ndarray:
        raise NotImplementedError

    def _check_input(self, img: RasterImage) -> None:
        if img.channels != 3 or img.width != EMBED_SIZE or img.height != EMBED_SIZE:
            raise DimensionMismatchError(
                f"provider {self.name!r} needs {EMBED_SIZE}x{EMBED_SIZE}x3 input, "
                f"got {img.width}x{img.height}x{img.channels}")


def _gaussian_matrix(seed: int, rows: int, cols: int) -> np.ndarray:
    """Standard-normal matrix from a SHA-256 counter stream plus Box-Muller.

    Hash-based so the same seed reproduces the same matrix on any platform
    and any numpy version.
    """
    n = rows * cols
    n_pairs = (n + 1) // 2
    need = 2 * n_pairs
    key = b"ffproj" + int(seed).to_bytes(8, "little", signed=True)
    chunks = []
    for counter in range((need * 8 + 31) // 32):
        chunks.append(hashlib.sha256(key + counter.to_bytes(8, "little")).digest())
    u = np.frombuffer(b"".join(chunks)[:need * 8], dtype="<u8")
    u = (u.astype(np.float64) + 1.0) / 2.0 ** 64      # uniform in (0, 1]
    u1, u2 = u[:n_pairs], u[n_pairs:]
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * np.pi * u2
    z = np.concatenate([radius * np.cos(angle), radius * np.sin(angle)])[:n]
    return z.reshape(rows, cols)


class SeededProjectionProvider(FeatureProvider):
    """Block-average the image to 16x16x3 and project through a fixed
    pseudo-random Gaussian matrix. Linear in pixel intensities."""

    def __init__(self, seed: int, output_dim: int):
        if output_dim < 1:
            raise InvalidDimError(f"output_dim must be >= 1, got {output_dim}")
        self.name = f"stub-{seed}-{output_dim}"
        self.seed = seed
        self.output_dim = output_dim
        self._matrix = _gaussian_matrix(seed, 768, output_dim)

    def embed(self, img: RasterImage) -> np.ndarray:
        self._check_input(img)
        blocks = img.pixels.astype(np.float64).reshape(16, 14, 16, 14, 3)
        coarse = blocks.mean(axis=(1, 3))             # 16x16x3
        flat = coarse.reshape(768) / 255.0
        return flat @ self._matrix


def seeded_projection_provider(seed: int, output_dim: int) -> FeatureProvider:
    return SeededProjectionProvider(seed, output_dim)


def parse_sidecar(path: Path) -> dict:
    """Read the key = value metadata file next to a model."""
    meta: dict = {}
    for raw_line in path.read_text().splitlines():
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ModelLoadError(f"{path}: bad metadata line {raw_line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in ("mean", "std"):
            parts = [float(p) for p in value.split(",")]
            if len(parts) != 3:
                raise ModelLoadError(f"{path}: {key} needs 3 comma-separated values")
            meta[key] = parts
        elif key == "output_dim":
            meta[key] = int(value)
        elif key == "scale":
            meta[key] = float(value)
        elif key in ("name", "layout"):
            meta[key] = value
        else:
            raise ModelLoadError(f"{path}: unknown metadata key {key!r}")
    return meta


def _check_declared_shape(graph: Graph, layout: str) -> str:
    """Validate the single image input against the two accepted layouts."""
    feed = [vi for vi in graph.inputs if vi.name not in graph.initializers]
    if len(feed) != 1:
        raise InputShapeUnsupportedError(
            f"model must have exactly one input, found {len(feed)}")
    dims = feed[0].dims

    def compatible(expected):
        if len(dims) != len(expected):
            return False
        return all(d is None or d == e for d, e in zip(dims, expected))

    if not dims:
        return layout
    nchw_ok = compatible([1, 3, EMBED_SIZE, EMBED_SIZE])
    nhwc_ok = compatible([1, EMBED_SIZE, EMBED_SIZE, 3])
    if layout == "nchw" and nchw_ok:
        return "nchw"
    if layout == "nhwc" and nhwc_ok:
        return "nhwc"
    if nchw_ok:
        return "nchw"
    if nhwc_ok:
        return "nhwc"
    raise InputShapeUnsupportedError(f"model input shape {dims} is not a "
                                     f"1x3x{EMBED_SIZE}x{EMBED_SIZE} or "
                                     f"1x{EMBED_SIZE}x{EMBED_SIZE}x3 image")


class ModelFileProvider(FeatureProvider):
    """Run an exported network on preprocessed pixels and return its flat output."""

    def __init__(self, path: str | Path, expected_dim: int):
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(str(path))
        meta_path = path.with_name(path.name + ".meta")
        meta = parse_sidecar(meta_path) if meta_path.exists() else {}

        self.graph = load_graph(path)
        check_supported(self.graph)
        self.layout = _check_declared_shape(self.graph, meta.get("layout", "nchw"))
        self.name = meta.get("name", path.stem)
        self.scale = meta.get("scale", 1.0 / 255.0)
        self.mean = np.array(meta.get("mean", [0.0, 0.0, 0.0]), dtype=np.float32)
        self.std = np.array(meta.get("std", [1.0, 1.0, 1.0]), dtype=np.float32)
        if "output_dim" in meta and meta["output_dim"] != expected_dim:
            raise DimensionMismatchError(
                f"{path}: metadata declares {meta['output_dim']} outputs, "
                f"expected {expected_dim}")

        probe = self._run(np.zeros((EMBED_SIZE, EMBED_SIZE, 3), dtype=np.uint8))
        if probe.size != expected_dim:
            raise DimensionMismatchError(
                f"{path}: model emits {probe.size} values, expected {expected_dim}")
        self.output_dim = expected_dim

    def _run(self, pixels: np.ndarray) -> np.ndarray:
        x = pixels.astype(np.float32) * np.float32(self.scale)
        x = (x - self.mean) / self.std
        if self.layout == "nchw":
            x = np.transpose(x, (2, 0, 1))
        out = run_graph(self.graph, x[None, ...])
        return np.asarray(out, dtype=np.float64).ravel()

    def embed(self, img: RasterImage) -> np.ndarray:
        self._check_input(img)
        return self._run(img.pixels)


def model_file_provider(path: str | Path, expected_dim: int) -> FeatureProvider:
    return ModelFileProvider(path, expected_dim)
