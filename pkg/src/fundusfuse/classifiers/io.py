"""Versioned binary container for trained models (magic bytes FFM1).

Layout: magic, kind tag, class/dim/seed header, a JSON config echo, then
named little-endian arrays. Loading reproduces predictions bit-exactly.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import CacheCorruptError
from .base import TrainedModel

MAGIC = b"FFM1"


def _write_bytes(out: bytearray, payload: bytes, fmt: str) -> None:
    out += struct.pack(fmt, len(payload))
    out += payload


def save_model(model: TrainedModel, path: str | Path) -> None:
    out = bytearray(MAGIC)
    _write_bytes(out, model.kind.encode(), "<B")
    out += struct.pack("<IIq", model.n_classes, model.feature_dim, model.seed)
    config = json.dumps(model.config_echo(), sort_keys=True,
                        separators=(",", ":")).encode()
    _write_bytes(out, config, "<I")

    arrays = model.to_arrays()
    out += struct.pack("<H", len(arrays))
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr)
        if arr.dtype.byteorder == ">":
            arr = arr.astype(arr.dtype.newbyteorder("<"))
        _write_bytes(out, name.encode(), "<B")
        _write_bytes(out, arr.dtype.str.encode(), "<B")
        out += struct.pack("<B", arr.ndim)
        for dim in arr.shape:
            out += struct.pack("<I", dim)
        _write_bytes(out, arr.tobytes(), "<Q")
    Path(path).write_bytes(bytes(out))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CacheCorruptError("truncated model file")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        values = struct.unpack(fmt, self.take(struct.calcsize(fmt)))
        return values if len(values) > 1 else values[0]

    def sized(self, fmt: str) -> bytes:
        return self.take(self.unpack(fmt))


def load_model(path: str | Path) -> TrainedModel:
    from . import MODEL_KINDS  # registry lives in the package root

    reader = _Reader(Path(path).read_bytes())
    if reader.take(4) != MAGIC:
        raise CacheCorruptError(f"{path}: bad magic, not a model container")
    kind = reader.sized("<B").decode()
    n_classes, feature_dim, seed = reader.unpack("<IIq")
    config = json.loads(reader.sized("<I").decode())

    arrays: dict[str, np.ndarray] = {}
    for _ in range(reader.unpack("<H")):
        name = reader.sized("<B").decode()
        dtype = np.dtype(reader.sized("<B").decode())
        ndim = reader.unpack("<B")
        shape = tuple(reader.unpack("<I") for _ in range(ndim))
        raw = reader.sized("<Q")
        arrays[name] = np.frombuffer(raw, dtype=dtype).reshape(shape).copy()

    if kind not in MODEL_KINDS:
        raise CacheCorruptError(f"{path}: unknown model kind {kind!r}")
    return MODEL_KINDS[kind].from_arrays(n_classes, feature_dim, seed,
                                         config, arrays)
