"""Boosted ensembles: multiclass SAMME stumps and one-vs-rest gradient boosting."""

from __future__ import annotations

import numpy as np

from ..errors import InvalidConfigError
from ..fusion import N_CLASSES, FusedSample
from .base import TrainConfig, TrainedModel, check_batch, samples_to_arrays

ERR_CLAMP = 1e-10


def samme_alpha(err: float, n_classes: int) -> float:
    """Stage weight ln((1-err)/err) + ln(K-1), with err clamped so the
    logs stay finite."""
    err = min(max(err, ERR_CLAMP), 1.0 - ERR_CLAMP)
    return float(np.log((1.0 - err) / err) + np.log(n_classes - 1))


class AdaBoostModel(TrainedModel):
    kind = "adaboost"

    def __init__(self, features, thresholds, left_cls, right_cls, alphas,
                 feature_dim: int, seed: int):
        super().__init__(N_CLASSES, feature_dim, seed)
        self.features = features
        self.thresholds = thresholds
        self.left_cls = left_cls
        self.right_cls = right_cls
        self.alphas = alphas

    def _stage_votes(self, Q: np.ndarray) -> np.ndarray:
        """(stages, n) class votes of every stump."""
        votes = np.empty((self.alphas.shape[0], Q.shape[0]), dtype=np.int64)
        for s in range(self.alphas.shape[0]):
            f = int(self.features[s])
            if f < 0:  # degenerate stump: constant prediction
                votes[s] = self.left_cls[s]
            else:
                votes[s] = np.where(Q[:, f] <= self.thresholds[s],
                                    self.left_cls[s], self.right_cls[s])
        return votes

    def predict_batch(self, Q: np.ndarray) -> np.ndarray:
        Q = check_batch(self, Q)
        scores = np.zeros((Q.shape[0], self.n_classes), dtype=np.float64)
        votes = self._stage_votes(Q)
        rows = np.arange(Q.shape[0])
        for s in range(self.alphas.shape[0]):
            scores[rows, votes[s]] += self.alphas[s]
        return np.argmax(scores, axis=1)

    def staged_error(self, Q: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Training error after 1, 2, ... kept stages."""
        Q = check_batch(self, Q)
        scores = np.zeros((Q.shape[0], self.n_classes), dtype=np.float64)
        votes = self._stage_votes(Q)
        rows = np.arange(Q.shape[0])
        errors = np.empty(self.alphas.shape[0], dtype=np.float64)
        for s in range(self.alphas.shape[0]):
            scores[rows, votes[s]] += self.alphas[s]
            errors[s] = float(np.mean(np.argmax(scores, axis=1) != y))
        return errors

    def config_echo(self) -> dict:
        return {"stages": int(self.alphas.shape[0])}

    def to_arrays(self) -> dict[str, np.ndarray]:
        return {"features": self.features, "thresholds": self.thresholds,
                "left_cls": self.left_cls, "right_cls": self.right_cls,
                "alphas": self.alphas}

    @classmethod
    def from_arrays(cls, n_classes, feature_dim, seed, config, arrays):
        return cls(arrays["features"], arrays["thresholds"], arrays["left_cls"],
                   arrays["right_cls"], arrays["alphas"], feature_dim, seed)


def _best_stump(X, Xs, valid, onehot_sorted, order, w, y):
    """Minimum weighted-error stump over all features and thresholds.

    Xs/order are the presorted views of X; scanning is vectorized over the
    full (position, feature) grid. Ties resolve to the earliest boundary,
    then the lowest feature index (row-major argmin).
    """
    n, d = X.shape
    ws = np.take_along_axis(np.broadcast_to(w[:, None], (n, d)), order, axis=0)
    cum_w = np.cumsum(ws, axis=0)
    cum_cls = np.cumsum(ws[:, :, None] * onehot_sorted, axis=0)
    totals = cum_cls[-1]                       # (d, K), identical rows
    left_best = cum_cls[:-1].max(axis=2)       # (n-1, d)
    right_best = (totals[None] - cum_cls[:-1]).max(axis=2)
    err = (cum_w[:-1] - left_best) + ((1.0 - cum_w[:-1]) - right_best)
    err[~valid] = np.inf

    tot = totals[0]
    const_cls = int(np.argmax(tot))
    const_err = float(1.0 - tot[const_cls])
    if not np.isfinite(err).any():
        return -1, 0.0, const_cls, const_cls, const_err

    flat = int(np.argmin(err))
    pos, f = divmod(flat, d)
    best_err = float(err[pos, f])
    if const_err <= best_err:
        return -1, 0.0, const_cls, const_cls, const_err
    threshold = float((Xs[pos, f] + Xs[pos + 1, f]) / 2.0)
    left_cls = int(np.argmax(cum_cls[pos, f]))
    right_cls = int(np.argmax(tot - cum_cls[pos, f]))
    return int(f), threshold, left_cls, right_cls, best_err


def adaboost_train(train: list[FusedSample], cfg: TrainConfig) -> AdaBoostModel:
    """SAMME over depth-1 stumps.

    Misclassified samples are upweighted by exp(alpha) each stage; boosting
    stops early when a stump is no better than chance (err >= 1 - 1/K,
    stage discarded) or perfect (err == 0, stage kept).
    """
    if cfg.ada_stages < 1:
        raise InvalidConfigError(f"ada_stages must be >= 1, got {cfg.ada_stages}")
    X, y = samples_to_arrays(train)
    n, d = X.shape
    K = N_CLASSES

    order = np.argsort(X, axis=0, kind="stable")
    Xs = np.take_along_axis(X, order, axis=0)
    valid = Xs[:-1] < Xs[1:]
    ys = np.take_along_axis(np.broadcast_to(y[:, None], (n, d)), order, axis=0)
    onehot_sorted = (ys[:, :, None] == np.arange(K)[None, None, :]).astype(np.float64)

    w = np.full(n, 1.0 / n, dtype=np.float64)
    features, thresholds, left_cls, right_cls, alphas = [], [], [], [], []
    for _ in range(cfg.ada_stages):
        f, thr, cl, cr, _scan_err = _best_stump(X, Xs, valid, onehot_sorted, order, w, y)
        pred = np.full(n, cl) if f < 0 else np.where(X[:, f] <= thr, cl, cr)
        miss = pred != y
        err = float(w[miss].sum())
        if err >= 1.0 - 1.0 / K:
            break
        alpha = samme_alpha(err, K)
        features.append(f)
        thresholds.append(thr)
        left_cls.append(cl)
        right_cls.append(cr)
        alphas.append(alpha)
        if err == 0.0:
            break
        w = w * np.exp(alpha * miss)
        w = w / w.sum()

    return AdaBoostModel(
        np.array(features, dtype=np.int64), np.array(thresholds, dtype=np.float64),
        np.array(left_cls, dtype=np.int64), np.array(right_cls, dtype=np.int64),
        np.array(alphas, dtype=np.float64), d, cfg.seed)


# --- gradient boosting -------------------------------------------------------

def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _best_reg_split(X: np.ndarray, g: np.ndarray, idx: np.ndarray):
    """Variance-reducing (feature, threshold), or None if nothing improves."""
    m = idx.shape[0]
    if m < 2:
        return None
    Xn = X[idx]
    gn = g[idx]
    order = np.argsort(Xn, axis=0, kind="stable")
    Xs = np.take_along_axis(Xn, order, axis=0)
    gs = np.take_along_axis(np.broadcast_to(gn[:, None], (m, Xn.shape[1])), order, axis=0)
    valid = Xs[:-1] < Xs[1:]
    if not valid.any():
        return None
    sl = np.cumsum(gs, axis=0)[:-1]
    nl = np.arange(1, m, dtype=np.float64)[:, None]
    total = gn.sum()
    score = sl ** 2 / nl + (total - sl) ** 2 / (m - nl)
    score[~valid] = -np.inf
    flat = int(np.argmax(score))
    pos, f = divmod(flat, Xn.shape[1])
    baseline = total ** 2 / m
    if not score[pos, f] > baseline:
        return None
    return int(f), float((Xs[pos, f] + Xs[pos + 1, f]) / 2.0)


def _build_reg_tree(X, g, h, idx, max_depth):
    """Depth-limited regression tree on the negative gradient; leaves hold
    the Newton step sum(g)/sum(h)."""
    feature, threshold, left, right, value = [], [], [], [], []

    def leaf(node_idx) -> int:
        node = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        denom = max(float(h[node_idx].sum()), 1e-12)
        value.append(float(g[node_idx].sum()) / denom)
        return node

    def grow(node_idx, depth) -> int:
        if depth >= max_depth:
            return leaf(node_idx)
        split = _best_reg_split(X, g, node_idx)
        if split is None:
            return leaf(node_idx)
        f, thr = split
        node = len(feature)
        feature.append(f)
        threshold.append(thr)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        go_left = X[node_idx, f] <= thr
        left[node] = grow(node_idx[go_left], depth + 1)
        right[node] = grow(node_idx[~go_left], depth + 1)
        return node

    grow(idx, 0)
    return (np.array(feature, dtype=np.int32), np.array(threshold, dtype=np.float64),
            np.array(left, dtype=np.int32), np.array(right, dtype=np.int32),
            np.array(value, dtype=np.float64))


def _reg_tree_apply(tree, Q: np.ndarray) -> np.ndarray:
    feature, threshold, left, right, value = tree
    cur = np.zeros(Q.shape[0], dtype=np.int32)
    while True:
        internal = feature[cur] >= 0
        if not internal.any():
            return value[cur]
        sel = np.nonzero(internal)[0]
        f = feature[cur[sel]]
        go_left = Q[sel, f] <= threshold[cur[sel]]
        cur[sel] = np.where(go_left, left[cur[sel]], right[cur[sel]])


class GradBoostModel(TrainedModel):
    kind = "grad_boost"

    def __init__(self, base_scores: np.ndarray, trees: list[list[tuple]],
                 learning_rate: float, feature_dim: int, seed: int):
        super().__init__(N_CLASSES, feature_dim, seed)
        self.base_scores = base_scores     # per-class prior log-odds
        self.trees = trees                 # trees[class][stage]
        self.learning_rate = learning_rate

    def class_scores(self, Q: np.ndarray, upto: int | None = None) -> np.ndarray:
        Q = check_batch(self, Q)
        scores = np.tile(self.base_scores, (Q.shape[0], 1))
        for c in range(self.n_classes):
            for tree in self.trees[c][:upto]:
                scores[:, c] += self.learning_rate * _reg_tree_apply(tree, Q)
        return scores

    def predict_batch(self, Q: np.ndarray) -> np.ndarray:
        return np.argmax(self.class_scores(Q), axis=1)

    def config_echo(self) -> dict:
        return {"stages": len(self.trees[0]), "learning_rate": self.learning_rate}

    def to_arrays(self) -> dict[str, np.ndarray]:
        flat = [t for per_class in self.trees for t in per_class]
        offsets = np.cumsum([0] + [t[0].shape[0] for t in flat]).astype(np.int64)
        return {
            "base_scores": self.base_scores,
            "offsets": offsets,
            "feature": np.concatenate([t[0] for t in flat]),
            "threshold": np.concatenate([t[1] for t in flat]),
            "left": np.concatenate([t[2] for t in flat]),
            "right": np.concatenate([t[3] for t in flat]),
            "value": np.concatenate([t[4] for t in flat]),
        }

    @classmethod
    def from_arrays(cls, n_classes, feature_dim, seed, config, arrays):
        stages = int(config["stages"])
        offsets = arrays["offsets"]
        flat = []
        for i in range(offsets.shape[0] - 1):
            lo, hi = int(offsets[i]), int(offsets[i + 1])
            flat.append(tuple(arrays[key][lo:hi]
                              for key in ("feature", "threshold", "left", "right", "value")))
        trees = [flat[c * stages:(c + 1) * stages] for c in range(n_classes)]
        return cls(arrays["base_scores"], trees, float(config["learning_rate"]),
                   feature_dim, seed)


def grad_boost_train(train: list[FusedSample], cfg: TrainConfig) -> GradBoostModel:
    """One-vs-rest binary logistic boosting with depth-2 regression trees.

    Class scores start at the prior log-odds, so a vanishing learning rate
    degenerates to the most-frequent-class predictor.
    """
    if cfg.gb_stages < 1 or cfg.gb_learning_rate <= 0:
        raise InvalidConfigError("gb_stages must be >= 1 and gb_learning_rate > 0")
    X, y = samples_to_arrays(train)
    n, d = X.shape
    all_idx = np.arange(n)

    base_scores = np.empty(N_CLASSES, dtype=np.float64)
    trees: list[list[tuple]] = []
    for c in range(N_CLASSES):
        target = (y == c).astype(np.float64)
        prior = float(np.clip(target.mean(), 1e-12, 1.0 - 1e-12))
        f0 = float(np.log(prior / (1.0 - prior)))
        base_scores[c] = f0
        score = np.full(n, f0, dtype=np.float64)
        per_class = []
        for _ in range(cfg.gb_stages):
            p = _sigmoid(score)
            g = target - p
            h = p * (1.0 - p)
            tree = _build_reg_tree(X, g, h, all_idx, max_depth=2)
            per_class.append(tree)
            score = score + cfg.gb_learning_rate * _reg_tree_apply(tree, X)
        trees.append(per_class)

    return GradBoostModel(base_scores, trees, cfg.gb_learning_rate, d, cfg.seed)
