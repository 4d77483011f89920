"""Shared model plumbing: training configuration and the fitted-model base."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionMismatchError, InvalidConfigError
from ..fusion import N_CLASSES, FusedSample


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for all five classifiers; every field is overridable."""

    knn_k: int = 5
    svm_lambda: float = 1e-4
    svm_epochs: int = 50
    rf_trees: int = 200
    rf_max_depth: int = 16
    rf_feature_frac: str | float = "sqrt"
    ada_stages: int = 100
    gb_stages: int = 100
    gb_learning_rate: float = 0.1
    seed: int = 42

    def __post_init__(self):
        counts = {"knn_k": self.knn_k, "svm_epochs": self.svm_epochs,
                  "rf_trees": self.rf_trees, "rf_max_depth": self.rf_max_depth,
                  "ada_stages": self.ada_stages, "gb_stages": self.gb_stages}
        for name, value in counts.items():
            if value < 1:
                raise InvalidConfigError(f"{name} must be >= 1, got {value}")
        if self.svm_lambda <= 0 or self.gb_learning_rate <= 0:
            raise InvalidConfigError("rates must be > 0")
        if self.rf_feature_frac != "sqrt":
            frac = float(self.rf_feature_frac)
            if not 0 < frac <= 1:
                raise InvalidConfigError(
                    f"rf_feature_frac must be 'sqrt' or in (0, 1], got {frac}")

    def mtry(self, dim: int) -> int:
        if self.rf_feature_frac == "sqrt":
            return min(dim, int(np.ceil(np.sqrt(dim))))
        return min(dim, max(1, int(np.ceil(float(self.rf_feature_frac) * dim))))


class TrainedModel:
    """Immutable fitted classifier. Subclasses fill `kind` and the arrays."""

    kind: str = ""

    def __init__(self, n_classes: int, feature_dim: int, seed: int):
        self.n_classes = n_classes
        self.feature_dim = feature_dim
        self.seed = seed

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def predict(self, v: np.ndarray) -> int:
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (self.feature_dim,):
            raise DimensionMismatchError(
                f"expected vector of length {self.feature_dim}, got {v.shape}")
        return int(self.predict_batch(v[None, :])[0])

    # Serialization hooks; see io.save_model / io.load_model.
    def config_echo(self) -> dict:
        return {}

    def to_arrays(self) -> dict[str, np.ndarray]:
        raise NotImplementedError

    @classmethod
    def from_arrays(cls, n_classes: int, feature_dim: int, seed: int,
                    config: dict, arrays: dict[str, np.ndarray]) -> "TrainedModel":
        raise NotImplementedError


def samples_to_arrays(train: list[FusedSample]) -> tuple[np.ndarray, np.ndarray]:
    X = np.stack([s.features for s in train]).astype(np.float64)
    y = np.array([s.label for s in train], dtype=np.int64)
    return X, y


def check_batch(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.feature_dim:
        raise DimensionMismatchError(
            f"expected (n, {model.feature_dim}) matrix, got {X.shape}")
    return X


__all__ = ["TrainConfig", "TrainedModel", "samples_to_arrays", "check_batch",
           "N_CLASSES"]
