"""Training routines for the five model kinds."""

from __future__ import annotations

import numpy as np
from numba import njit

from .._rng import derive_seed, rng_for
from ..errors import DataError
from . import _tree
from .base import (
    BoostedModel,
    EasyEnsembleModel,
    ForestModel,
    LinearModel,
    Tree,
    TrainedModel,
    _sigmoid,
)
from .config import (
    BOOSTED_TREES,
    EASY_ENSEMBLE,
    LINEAR_SVM,
    LOGISTIC_REGRESSION,
    RANDOM_FOREST,
    ModelConfig,
)


def _check_training_input(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y).astype(np.float64)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.size:
        raise DataError("training needs a 2-d matrix and a matching label vector")
    if X.shape[0] == 0 or X.shape[1] == 0:
        raise DataError("training matrix is empty")
    if not np.isfinite(X).all():
        raise DataError("training matrix contains non-finite values")
    if not np.isin(y, (0.0, 1.0)).all():
        raise DataError("labels must be 0/1")
    if (y == y[0]).all():
        raise DataError("training labels contain a single class")
    return X, y


def logistic_loss(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, l2: float) -> float:
    """Mean cross-entropy plus (l2/2)*||w||^2; the bias is unpenalized."""
    z = X @ w + b
    # stable log(1+exp(-|z|)) formulation
    loss = np.logaddexp(0.0, -z) * y + np.logaddexp(0.0, z) * (1.0 - y)
    return float(loss.mean() + 0.5 * l2 * float(w @ w))


def logistic_gradient(
    w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, l2: float
) -> tuple[np.ndarray, float]:
    p = _sigmoid(X @ w + b)
    gw = X.T @ (p - y) / y.size + l2 * w
    gb = float((p - y).mean())
    return gw, gb


def _train_logistic(cfg: ModelConfig, X: np.ndarray, y: np.ndarray) -> LinearModel:
    lr = float(cfg.params["learning_rate"])
    l2 = float(cfg.params["l2"])
    w = np.zeros(X.shape[1], dtype=np.float64)
    b = 0.0
    for _ in range(int(cfg.params["epochs"])):
        gw, gb = logistic_gradient(w, b, X, y, l2)
        w -= lr * gw
        b -= lr * gb
    return LinearModel(kind=LOGISTIC_REGRESSION, weights=w, bias=b, n_features=X.shape[1])


@njit(cache=True)
def _svm_epochs(X, y_signed, order, w, b, lr, l2, epochs):
    n = X.shape[0]
    p = X.shape[1]
    bias = b
    for e in range(epochs):
        for t in range(n):
            i = order[e, t]
            margin = bias
            for j in range(p):
                margin += w[j] * X[i, j]
            margin *= y_signed[i]
            if margin < 1.0:
                for j in range(p):
                    w[j] = (1.0 - lr * l2) * w[j] + lr * y_signed[i] * X[i, j]
                bias += lr * y_signed[i]
            else:
                for j in range(p):
                    w[j] = (1.0 - lr * l2) * w[j]
    return bias


def _train_svm(cfg: ModelConfig, X: np.ndarray, y: np.ndarray) -> LinearModel:
    epochs = int(cfg.params["epochs"])
    rng = rng_for(cfg.seed)
    order = np.empty((epochs, X.shape[0]), dtype=np.int64)
    for e in range(epochs):
        order[e] = rng.permutation(X.shape[0])
    w = np.zeros(X.shape[1], dtype=np.float64)
    y_signed = 2.0 * y - 1.0
    b = _svm_epochs(
        X, y_signed, order, w, 0.0,
        float(cfg.params["learning_rate"]), float(cfg.params["l2"]), epochs,
    )
    return LinearModel(kind=LINEAR_SVM, weights=w, bias=float(b), n_features=X.shape[1])


def _grow_gini(
    X: np.ndarray, y: np.ndarray, idx: np.ndarray,
    max_depth: int | None, min_leaf: int, n_feat_split: int, seed: int,
    importance: np.ndarray,
) -> Tree:
    cap = 2 * idx.size + 2
    feature = np.empty(cap, dtype=np.int64)
    threshold = np.zeros(cap, dtype=np.float64)
    left = np.empty(cap, dtype=np.int64)
    right = np.empty(cap, dtype=np.int64)
    value = np.empty(cap, dtype=np.float64)
    depth = -1 if max_depth is None else int(max_depth)
    n = _tree.grow_classification_tree(
        X, y, idx, depth, min_leaf, n_feat_split, np.uint64(seed),
        feature, threshold, left, right, value, importance,
    )
    return Tree(
        feature=feature[:n].copy(),
        threshold=threshold[:n].copy(),
        left=left[:n].copy(),
        right=right[:n].copy(),
        value=value[:n].copy(),
    )


def bootstrap_indices(n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.integers(0, n, size=n, dtype=np.int64)


def _train_forest(cfg: ModelConfig, X: np.ndarray, y: np.ndarray) -> ForestModel:
    n, p = X.shape
    n_feat_split = max(1, int(np.sqrt(p)))
    importance = np.zeros(p, dtype=np.float64)
    trees = []
    for t in range(int(cfg.params["n_trees"])):
        tree_seed = derive_seed(cfg.seed, t)
        idx = bootstrap_indices(n, rng_for(cfg.seed, t))
        trees.append(
            _grow_gini(
                X, y, idx,
                cfg.params["max_depth"], int(cfg.params["min_samples_leaf"]),
                n_feat_split, tree_seed, importance,
            )
        )
    # per-tree accumulation uses row-weighted gains; scale to per-row units
    importance /= n * len(trees)
    return ForestModel(
        kind=RANDOM_FOREST, trees=tuple(trees), n_features=p, raw_importance=importance
    )


def _grow_sse(
    X: np.ndarray, g: np.ndarray, h: np.ndarray,
    max_depth: int | None, min_leaf: int, importance: np.ndarray,
) -> Tree:
    cap = 2 * X.shape[0] + 2
    feature = np.empty(cap, dtype=np.int64)
    threshold = np.zeros(cap, dtype=np.float64)
    left = np.empty(cap, dtype=np.int64)
    right = np.empty(cap, dtype=np.int64)
    value = np.empty(cap, dtype=np.float64)
    depth = -1 if max_depth is None else int(max_depth)
    n = _tree.grow_regression_tree(
        X, g, h, depth, min_leaf, feature, threshold, left, right, value, importance
    )
    return Tree(
        feature=feature[:n].copy(),
        threshold=threshold[:n].copy(),
        left=left[:n].copy(),
        right=right[:n].copy(),
        value=value[:n].copy(),
    )


def _train_boosted(
    cfg: ModelConfig, X: np.ndarray, y: np.ndarray, kind: str = BOOSTED_TREES
) -> BoostedModel:
    n, p = X.shape
    n_pos = int(y.sum())
    n_neg = n - n_pos
    w_pos = cfg.params.get("class_weight_positive")
    if w_pos is None:
        w_pos = n_neg / n_pos
    w = np.where(y == 1.0, float(w_pos), 1.0)
    shrinkage = float(cfg.params["shrinkage"])
    min_leaf = int(cfg.params["min_samples_leaf"])
    max_depth = cfg.params["max_depth"]

    wy = float((w * y).sum())
    base = float(np.log(wy / (w.sum() - wy)))
    raw = np.full(n, base, dtype=np.float64)
    importance = np.zeros(p, dtype=np.float64)
    trees = []
    for _ in range(int(cfg.params["n_rounds"])):
        prob = _sigmoid(raw)
        g = w * (y - prob)
        h = w * prob * (1.0 - prob)
        tree = _grow_sse(X, g, h, max_depth, min_leaf, importance)
        raw += shrinkage * tree.eval(X)
        trees.append(tree)
    return BoostedModel(
        kind=kind,
        trees=tuple(trees),
        base_score=base,
        shrinkage=shrinkage,
        n_features=p,
        raw_importance=importance,
    )


def _train_easy_ensemble(cfg: ModelConfig, X: np.ndarray, y: np.ndarray) -> EasyEnsembleModel:
    pos_idx = np.nonzero(y == 1.0)[0]
    neg_idx = np.nonzero(y == 0.0)[0]
    minority, majority = (pos_idx, neg_idx) if pos_idx.size <= neg_idx.size else (neg_idx, pos_idx)
    member_cfg = ModelConfig(
        kind=BOOSTED_TREES,
        params={
            "n_rounds": cfg.params["n_rounds"],
            "shrinkage": cfg.params["shrinkage"],
            "max_depth": cfg.params["max_depth"],
            "min_samples_leaf": cfg.params["min_samples_leaf"],
            "class_weight_positive": 1.0,
        },
        seed=cfg.seed,
    )
    members = []
    subsets = []
    for s in range(int(cfg.params["ee_subsets"])):
        rng = rng_for(cfg.seed, s)
        sampled = rng.choice(majority, size=minority.size, replace=False)
        subset = np.sort(np.concatenate([minority, sampled]))
        members.append(_train_boosted(member_cfg, X[subset], y[subset]))
        subsets.append(tuple(int(i) for i in subset))
    return EasyEnsembleModel(
        kind=EASY_ENSEMBLE,
        members=tuple(members),
        n_features=X.shape[1],
        subset_indices=tuple(subsets),
    )


def train(cfg: ModelConfig, X: np.ndarray, y: np.ndarray) -> TrainedModel:
    """Fit one model; deterministic in (cfg, X, y) including cfg.seed."""
    X, y = _check_training_input(X, y)
    if cfg.kind == LOGISTIC_REGRESSION:
        return _train_logistic(cfg, X, y)
    if cfg.kind == LINEAR_SVM:
        return _train_svm(cfg, X, y)
    if cfg.kind == RANDOM_FOREST:
        return _train_forest(cfg, X, y)
    if cfg.kind == BOOSTED_TREES:
        return _train_boosted(cfg, X, y)
    return _train_easy_ensemble(cfg, X, y)
