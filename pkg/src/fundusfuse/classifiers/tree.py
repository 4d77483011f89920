"""CART classification trees with Gini splits, stored as flat node arrays."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class TreeArrays:
    """Array-of-nodes tree: feature < 0 marks a leaf holding leaf_class."""

    feature: np.ndarray    # int32
    threshold: np.ndarray  # float64
    left: np.ndarray       # int32
    right: np.ndarray      # int32
    leaf_class: np.ndarray  # int32

    def n_nodes(self) -> int:
        return self.feature.shape[0]


def _best_split(X: np.ndarray, y: np.ndarray, idx: np.ndarray,
                features: np.ndarray, n_classes: int):
    """Highest-purity (feature, threshold) over the candidate features.

    Score for a split is sum over sides of (squared class counts / side
    size); larger is purer. Returns None when no feature offers a strict
    improvement over keeping the node whole.
    """
    y_node = y[idx]
    m = idx.shape[0]
    counts = np.bincount(y_node, minlength=n_classes).astype(np.float64)
    baseline = float((counts ** 2).sum() / m)

    best = (baseline, -1, 0.0)
    onehot = np.zeros((m, n_classes), dtype=np.float64)
    onehot[np.arange(m), y_node] = 1.0
    for f in features:
        v = X[idx, f]
        order = np.argsort(v, kind="stable")
        vs = v[order]
        boundary = vs[:-1] < vs[1:]
        if not boundary.any():
            continue
        left_counts = np.cumsum(onehot[order], axis=0)[:-1]
        nl = np.arange(1, m, dtype=np.float64)
        nr = m - nl
        score = ((left_counts ** 2).sum(axis=1) / nl
                 + ((counts - left_counts) ** 2).sum(axis=1) / nr)
        score[~boundary] = -np.inf
        pos = int(np.argmax(score))
        if score[pos] > best[0]:
            best = (float(score[pos]), int(f), float((vs[pos] + vs[pos + 1]) / 2.0))
    if best[1] < 0:
        return None
    return best[1], best[2]


def build_tree(X: np.ndarray, y: np.ndarray, n_classes: int, max_depth: int,
               mtry: int, rng: np.random.Generator) -> TreeArrays:
    """Grow one tree; candidate features per node are drawn from rng."""
    feature, threshold, left, right, leaf_class = [], [], [], [], []

    def make_leaf(idx) -> int:
        node = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        leaf_class.append(int(np.argmax(np.bincount(y[idx], minlength=n_classes))))
        return node

    def grow(idx: np.ndarray, depth: int) -> int:
        if depth >= max_depth or idx.shape[0] < 2 or len(np.unique(y[idx])) == 1:
            return make_leaf(idx)
        cand = rng.choice(X.shape[1], size=mtry, replace=False)
        split = _best_split(X, y, idx, cand, n_classes)
        if split is None:
            return make_leaf(idx)
        f, thr = split
        node = len(feature)
        feature.append(f)
        threshold.append(thr)
        left.append(-1)
        right.append(-1)
        leaf_class.append(-1)
        go_left = X[idx, f] <= thr
        left[node] = grow(idx[go_left], depth + 1)
        right[node] = grow(idx[~go_left], depth + 1)
        return node

    grow(np.arange(X.shape[0]), 0)
    return TreeArrays(
        feature=np.array(feature, dtype=np.int32),
        threshold=np.array(threshold, dtype=np.float64),
        left=np.array(left, dtype=np.int32),
        right=np.array(right, dtype=np.int32),
        leaf_class=np.array(leaf_class, dtype=np.int32),
    )


def tree_apply(tree: TreeArrays, X: np.ndarray) -> np.ndarray:
    """Leaf class for every row, by vectorized descent."""
    cur = np.zeros(X.shape[0], dtype=np.int32)
    while True:
        internal = tree.feature[cur] >= 0
        if not internal.any():
            return tree.leaf_class[cur]
        sel = np.nonzero(internal)[0]
        f = tree.feature[cur[sel]]
        go_left = X[sel, f] <= tree.threshold[cur[sel]]
        cur[sel] = np.where(go_left, tree.left[cur[sel]], tree.right[cur[sel]])
