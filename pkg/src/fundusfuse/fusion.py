"""Concatenate feature blocks and z-score them with training-set statistics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    BlockOrderViolationError,
    DimensionMismatchError,
    EmptyBlockListError,
    InsufficientSamplesError,
)
from .handcrafted import BLOCK_ORDER, FeatureVector

N_CLASSES = 5


@dataclass(frozen=True)
class FusedSample:
    """One standardized (or raw) fused vector plus its class label."""

    features: np.ndarray
    label: int
    source_id: str = ""

    def __post_init__(self):
        if not 0 <= self.label < N_CLASSES:
            raise ValueError(f"label must be in 0..{N_CLASSES - 1}, got {self.label}")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("non-finite feature value")


def concat(blocks: list[FeatureVector]) -> np.ndarray:
    """Join blocks into one vector, enforcing the canonical block order."""
    if not blocks:
        raise EmptyBlockListError("no feature blocks to concatenate")
    ranks = [BLOCK_ORDER.index(b.block_name) for b in blocks]
    if any(a >= b for a, b in zip(ranks, ranks[1:])):
        names = [b.block_name for b in blocks]
        raise BlockOrderViolationError(f"blocks {names} violate order {list(BLOCK_ORDER)}")
    return np.concatenate([b.values for b in blocks])


def block_offsets(blocks: list[FeatureVector]) -> list[tuple[str, int, int]]:
    """(name, start, end) spans of each block inside the concatenated vector."""
    spans = []
    pos = 0
    for b in blocks:
        spans.append((b.block_name, pos, pos + b.dim))
        pos += b.dim
    return spans


@dataclass(frozen=True)
class Standardizer:
    """Per-dimension mean and population standard deviation of a training set."""

    means: np.ndarray
    stds: np.ndarray

    @property
    def dim(self) -> int:
        return self.means.shape[0]


def fit_standardizer(train: list[FusedSample]) -> Standardizer:
    if len(train) < 2:
        raise InsufficientSamplesError(f"need >= 2 samples, got {len(train)}")
    matrix = np.stack([s.features for s in train])
    means = matrix.mean(axis=0)
    stds = matrix.std(axis=0)
    # A bit-constant column must get std exactly 0 (and its exact value as
    # the mean), or rounding dust in the mean would z-score it to +-1.
    constant = (matrix == matrix[0]).all(axis=0)
    return Standardizer(means=np.where(constant, matrix[0], means),
                        stds=np.where(constant, 0.0, stds))


def apply_standardizer(s: Standardizer, v: np.ndarray) -> np.ndarray:
    """(v - mean) / std, with zero-variance dimensions mapped to 0."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (s.dim,):
        raise DimensionMismatchError(f"vector length {v.shape} != fitted dim {s.dim}")
    out = v - s.means
    nonzero = s.stds > 0
    out[nonzero] /= s.stds[nonzero]
    out[~nonzero] = 0.0
    return out
