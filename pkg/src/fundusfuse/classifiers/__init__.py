"""The five classifiers trained on fused samples, plus model persistence."""

from __future__ import annotations

import numpy as np

from ..errors import InvalidConfigError
from ..fusion import FusedSample
from .base import N_CLASSES, TrainConfig, TrainedModel
from .boosting import AdaBoostModel, GradBoostModel, adaboost_train, grad_boost_train, samme_alpha
from .forest import RandomForestModel, random_forest_train
from .io import load_model, save_model
from .knn import KnnModel, knn_train
from .svm import LinearSvmModel, linear_svm_train

MODEL_KINDS: dict[str, type[TrainedModel]] = {
    "knn": KnnModel,
    "linear_svm": LinearSvmModel,
    "random_forest": RandomForestModel,
    "adaboost": AdaBoostModel,
    "grad_boost": GradBoostModel,
}

# Short names used on the command line and in grid outputs.
KIND_ALIASES = {
    "knn": "knn",
    "svm": "linear_svm",
    "rf": "random_forest",
    "ada": "adaboost",
    "gb": "grad_boost",
}


def resolve_kind(name: str) -> str:
    if name in KIND_ALIASES:
        return KIND_ALIASES[name]
    if name in MODEL_KINDS:
        return name
    valid = sorted(KIND_ALIASES) + sorted(MODEL_KINDS)
    raise InvalidConfigError(f"unknown classifier {name!r}; valid names: {valid}")


def train_model(kind: str, train: list[FusedSample], cfg: TrainConfig) -> TrainedModel:
    kind = resolve_kind(kind)
    if kind == "knn":
        return knn_train(train, cfg.knn_k, cfg.seed)
    if kind == "linear_svm":
        return linear_svm_train(train, cfg)
    if kind == "random_forest":
        return random_forest_train(train, cfg)
    if kind == "adaboost":
        return adaboost_train(train, cfg)
    return grad_boost_train(train, cfg)


def predict(model: TrainedModel, v: np.ndarray) -> int:
    """Class index in 0..4 for one feature vector."""
    return model.predict(v)


__all__ = [
    "N_CLASSES", "TrainConfig", "TrainedModel", "MODEL_KINDS", "KIND_ALIASES",
    "KnnModel", "LinearSvmModel", "RandomForestModel", "AdaBoostModel",
    "GradBoostModel", "knn_train", "linear_svm_train", "random_forest_train",
    "adaboost_train", "grad_boost_train", "samme_alpha", "train_model",
    "predict", "resolve_kind", "save_model", "load_model",
]
