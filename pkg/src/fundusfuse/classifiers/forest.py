"""Random forest over bootstrap resamples of Gini CART trees."""

from __future__ import annotations

import numpy as np

from ..errors import InvalidConfigError
from ..fusion import N_CLASSES, FusedSample
from .base import TrainConfig, TrainedModel, check_batch, samples_to_arrays
from .tree import TreeArrays, build_tree, tree_apply


class RandomForestModel(TrainedModel):
    kind = "random_forest"

    def __init__(self, trees: list[TreeArrays], feature_dim: int, seed: int,
                 max_depth: int, feature_frac):
        super().__init__(N_CLASSES, feature_dim, seed)
        self.trees = trees
        self.max_depth = max_depth
        self.feature_frac = feature_frac

    def predict_batch(self, Q: np.ndarray) -> np.ndarray:
        Q = check_batch(self, Q)
        votes = np.zeros((Q.shape[0], self.n_classes), dtype=np.int64)
        for tree in self.trees:
            labels = tree_apply(tree, Q)
            votes[np.arange(Q.shape[0]), labels] += 1
        return np.argmax(votes, axis=1)

    def config_echo(self) -> dict:
        return {"n_trees": len(self.trees), "max_depth": self.max_depth,
                "feature_frac": self.feature_frac}

    def to_arrays(self) -> dict[str, np.ndarray]:
        # Trees are concatenated; offsets delimit each tree's node block.
        offsets = np.cumsum([0] + [t.n_nodes() for t in self.trees]).astype(np.int64)
        return {
            "offsets": offsets,
            "feature": np.concatenate([t.feature for t in self.trees]),
            "threshold": np.concatenate([t.threshold for t in self.trees]),
            "left": np.concatenate([t.left for t in self.trees]),
            "right": np.concatenate([t.right for t in self.trees]),
            "leaf_class": np.concatenate([t.leaf_class for t in self.trees]),
        }

    @classmethod
    def from_arrays(cls, n_classes, feature_dim, seed, config, arrays):
        offsets = arrays["offsets"]
        trees = []
        for i in range(offsets.shape[0] - 1):
            lo, hi = int(offsets[i]), int(offsets[i + 1])
            trees.append(TreeArrays(
                feature=arrays["feature"][lo:hi],
                threshold=arrays["threshold"][lo:hi],
                left=arrays["left"][lo:hi],
                right=arrays["right"][lo:hi],
                leaf_class=arrays["leaf_class"][lo:hi],
            ))
        return cls(trees, feature_dim, seed, int(config["max_depth"]),
                   config["feature_frac"])


def random_forest_train(train: list[FusedSample], cfg: TrainConfig) -> RandomForestModel:
    """Bootstrap + per-node feature subsampling; each tree's random stream
    derives from (seed, tree_index) so trees are order-independent."""
    if cfg.rf_trees < 1:
        raise InvalidConfigError(f"rf_trees must be >= 1, got {cfg.rf_trees}")
    X, y = samples_to_arrays(train)
    n, d = X.shape
    mtry = cfg.mtry(d)
    trees = []
    for index in range(cfg.rf_trees):
        rng = np.random.default_rng([cfg.seed, index])
        boot = rng.integers(0, n, size=n)
        trees.append(build_tree(X[boot], y[boot], N_CLASSES,
                                cfg.rf_max_depth, mtry, rng))
    return RandomForestModel(trees, d, cfg.seed, cfg.rf_max_depth,
                             cfg.rf_feature_frac)
