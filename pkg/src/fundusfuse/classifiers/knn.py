"""k-nearest-neighbors with fully specified tie-breaking."""

from __future__ import annotations

import numpy as np

from ..errors import InvalidKError
from ..fusion import N_CLASSES, FusedSample
from .base import TrainedModel, check_batch, samples_to_arrays


class KnnModel(TrainedModel):
    kind = "knn"

    def __init__(self, X: np.ndarray, y: np.ndarray, k: int, seed: int):
        super().__init__(N_CLASSES, X.shape[1], seed)
        self.X = X
        self.y = y
        self.k = k

    def predict_batch(self, Q: np.ndarray) -> np.ndarray:
        Q = check_batch(self, Q)
        # Squared Euclidean via the expansion; ranking only, so the small
        # cancellation error is irrelevant.
        d2 = (Q ** 2).sum(axis=1)[:, None] + (self.X ** 2).sum(axis=1)[None, :] \
            - 2.0 * Q @ self.X.T
        out = np.empty(Q.shape[0], dtype=np.int64)
        for row in range(Q.shape[0]):
            ranked = np.argsort(d2[row], kind="stable")[:self.k]
            labels = self.y[ranked]
            counts = np.bincount(labels, minlength=self.n_classes)
            top = counts.max()
            if (counts == top).sum() == 1:
                out[row] = int(np.argmax(counts))
            else:
                tied = set(np.nonzero(counts == top)[0].tolist())
                out[row] = next(int(lab) for lab in labels if int(lab) in tied)
        return out

    def config_echo(self) -> dict:
        return {"k": self.k}

    def to_arrays(self) -> dict[str, np.ndarray]:
        return {"X": self.X, "y": self.y}

    @classmethod
    def from_arrays(cls, n_classes, feature_dim, seed, config, arrays):
        return cls(arrays["X"], arrays["y"], int(config["k"]), seed)


def knn_train(train: list[FusedSample], k: int, seed: int = 42) -> KnnModel:
    """Memorize the training set; prediction is a majority vote of the k
    nearest stored vectors. Vote ties go to the nearest tied class,
    distance ties to the lower sample index."""
    if k < 1 or k > len(train):
        raise InvalidKError(f"k must be in 1..{len(train)}, got {k}")
    X, y = samples_to_arrays(train)
    return KnnModel(X, y, k, seed)
