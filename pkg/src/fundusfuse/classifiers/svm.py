"""One-vs-rest linear SVM trained by Pegasos-style subgradient descent."""

from __future__ import annotations

import numpy as np

from ..errors import SingleClassTrainingSetError
from ..fusion import N_CLASSES, FusedSample
from .base import TrainConfig, TrainedModel, check_batch, samples_to_arrays


class LinearSvmModel(TrainedModel):
    kind = "linear_svm"

    def __init__(self, W: np.ndarray, seed: int, svm_lambda: float, epochs: int):
        # W holds one row per class over the augmented (features + bias) space.
        super().__init__(W.shape[0], W.shape[1] - 1, seed)
        self.W = W
        self.svm_lambda = svm_lambda
        self.epochs = epochs

    def predict_batch(self, Q: np.ndarray) -> np.ndarray:
        Q = check_batch(self, Q)
        scores = Q @ self.W[:, :-1].T + self.W[:, -1][None, :]
        return np.argmax(scores, axis=1)

    def config_echo(self) -> dict:
        return {"svm_lambda": self.svm_lambda, "epochs": self.epochs}

    def to_arrays(self) -> dict[str, np.ndarray]:
        return {"W": self.W}

    @classmethod
    def from_arrays(cls, n_classes, feature_dim, seed, config, arrays):
        return cls(arrays["W"], seed, float(config["svm_lambda"]),
                   int(config["epochs"]))


def linear_svm_train(train: list[FusedSample], cfg: TrainConfig) -> LinearSvmModel:
    """Hinge loss + L2, one binary scorer per class, argmax prediction.

    Step size is 1/(lambda * t) with a seed-fixed shuffle per epoch; the
    bias rides along as an augmented constant feature. The run is
    bit-reproducible from (data, config, seed).
    """
    X, y = samples_to_arrays(train)
    if np.unique(y).size < 2:
        raise SingleClassTrainingSetError("training set holds a single class")
    n, d = X.shape
    X_aug = np.hstack([X, np.ones((n, 1))])
    lam = cfg.svm_lambda

    W = np.zeros((N_CLASSES, d + 1), dtype=np.float64)
    for c in range(N_CLASSES):
        rng = np.random.default_rng([cfg.seed, c])
        sign = np.where(y == c, 1.0, -1.0)
        w = np.zeros(d + 1, dtype=np.float64)
        t = 0
        for _ in range(cfg.svm_epochs):
            for i in rng.permutation(n):
                t += 1
                eta = 1.0 / (lam * t)
                margin = sign[i] * (w @ X_aug[i])
                w *= 1.0 - eta * lam
                if margin < 1.0:
                    w += (eta * sign[i]) * X_aug[i]
        W[c] = w
    return LinearSvmModel(W, cfg.seed, lam, cfg.svm_epochs)
