"""Trained-model representations, scoring, prediction, and serialization.

Scores are probabilities in [0, 1] for every kind except the linear SVM,
which scores by raw margin; predict() maps the conventional 0.5 threshold
to margin 0 for that kind.  A score exactly at the threshold predicts
positive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, DataError
from . import _tree
from .config import (
    BOOSTED_TREES,
    EASY_ENSEMBLE,
    LINEAR_SVM,
    LOGISTIC_REGRESSION,
    RANDOM_FOREST,
)


@dataclass(frozen=True)
class Tree:
    """Flat node-array binary tree; feature < 0 marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def eval(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(X.shape[0], dtype=np.float64)
        _tree.eval_tree(X, self.feature, self.threshold, self.left, self.right, self.value, out)
        return out

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    def to_json_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "Tree":
        return cls(
            feature=np.asarray(d["feature"], dtype=np.int64),
            threshold=np.asarray(d["threshold"], dtype=np.float64),
            left=np.asarray(d["left"], dtype=np.int64),
            right=np.asarray(d["right"], dtype=np.int64),
            value=np.asarray(d["value"], dtype=np.float64),
        )


@dataclass(frozen=True)
class LinearModel:
    kind: str
    weights: np.ndarray
    bias: float
    n_features: int

    def raw(self, X: np.ndarray) -> np.ndarray:
        return X @ self.weights + self.bias


@dataclass(frozen=True)
class ForestModel:
    kind: str
    trees: tuple[Tree, ...]
    n_features: int
    raw_importance: np.ndarray


@dataclass(frozen=True)
class BoostedModel:
    kind: str
    trees: tuple[Tree, ...]
    base_score: float
    shrinkage: float
    n_features: int
    raw_importance: np.ndarray

    def raw(self, X: np.ndarray) -> np.ndarray:
        acc = np.full(X.shape[0], self.base_score, dtype=np.float64)
        for t in self.trees:
            acc += self.shrinkage * t.eval(X)
        return acc


@dataclass(frozen=True)
class EasyEnsembleModel:
    kind: str
    members: tuple[BoostedModel, ...]
    n_features: int
    subset_indices: tuple[tuple[int, ...], ...] = field(repr=False, default=())


TrainedModel = LinearModel | ForestModel | BoostedModel | EasyEnsembleModel


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _check_width(m: TrainedModel, X: np.ndarray) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != m.n_features:
        raise DataError(
            f"feature width {X.shape[1] if X.ndim == 2 else '?'} does not match "
            f"training width {m.n_features}"
        )
    return X


def score(m: TrainedModel, X: np.ndarray) -> np.ndarray:
    """Per-row score: class-1 probability, or raw margin for the linear SVM."""
    X = _check_width(m, X)
    if isinstance(m, LinearModel):
        raw = m.raw(X)
        return raw if m.kind == LINEAR_SVM else _sigmoid(raw)
    if isinstance(m, ForestModel):
        acc = np.zeros(X.shape[0], dtype=np.float64)
        for t in m.trees:
            acc += t.eval(X)
        return acc / len(m.trees)
    if isinstance(m, BoostedModel):
        return _sigmoid(m.raw(X))
    acc = np.zeros(X.shape[0], dtype=np.float64)
    for member in m.members:
        acc += _sigmoid(member.raw(X))
    return acc / len(m.members)


def predict(m: TrainedModel, X: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    """Label rows by score >= threshold; 0.5 means margin 0 for the SVM."""
    s = score(m, X)
    if isinstance(m, LinearModel) and m.kind == LINEAR_SVM:
        cut = 0.0 if threshold == 0.5 else threshold
    else:
        cut = threshold
    return (s >= cut).astype(np.int8)


def column_ranking(m: TrainedModel) -> np.ndarray:
    """Per-column relevance used by recursive elimination; higher is better."""
    if isinstance(m, LinearModel):
        return np.abs(m.weights)
    if isinstance(m, (ForestModel, BoostedModel)):
        return m.raw_importance.copy()
    raise ConfigError(f"model kind {m.kind!r} provides no per-feature ranking")


def feature_importances(m: TrainedModel) -> np.ndarray:
    """Impurity-decrease importances normalized to sum 1."""
    if not isinstance(m, (ForestModel, BoostedModel)):
        raise ConfigError(f"model kind {m.kind!r} has no impurity importances")
    total = float(m.raw_importance.sum())
    if total <= 0.0:
        return np.full(m.n_features, 1.0 / m.n_features)
    return m.raw_importance / total


def model_to_json_dict(m: TrainedModel) -> dict:
    if isinstance(m, LinearModel):
        return {
            "kind": m.kind,
            "n_features": m.n_features,
            "weights": m.weights.tolist(),
            "bias": m.bias,
        }
    if isinstance(m, ForestModel):
        return {
            "kind": m.kind,
            "n_features": m.n_features,
            "trees": [t.to_json_dict() for t in m.trees],
            "raw_importance": m.raw_importance.tolist(),
        }
    if isinstance(m, BoostedModel):
        return {
            "kind": m.kind,
            "n_features": m.n_features,
            "trees": [t.to_json_dict() for t in m.trees],
            "base_score": m.base_score,
            "shrinkage": m.shrinkage,
            "raw_importance": m.raw_importance.tolist(),
        }
    return {
        "kind": m.kind,
        "n_features": m.n_features,
        "members": [model_to_json_dict(b) for b in m.members],
    }


def model_from_json_dict(d: dict) -> TrainedModel:
    kind = d["kind"]
    if kind in (LOGISTIC_REGRESSION, LINEAR_SVM):
        return LinearModel(
            kind=kind,
            weights=np.asarray(d["weights"], dtype=np.float64),
            bias=float(d["bias"]),
            n_features=int(d["n_features"]),
        )
    if kind == RANDOM_FOREST:
        return ForestModel(
            kind=kind,
            trees=tuple(Tree.from_json_dict(t) for t in d["trees"]),
            n_features=int(d["n_features"]),
            raw_importance=np.asarray(d["raw_importance"], dtype=np.float64),
        )
    if kind == BOOSTED_TREES:
        return BoostedModel(
            kind=kind,
            trees=tuple(Tree.from_json_dict(t) for t in d["trees"]),
            base_score=float(d["base_score"]),
            shrinkage=float(d["shrinkage"]),
            n_features=int(d["n_features"]),
            raw_importance=np.asarray(d["raw_importance"], dtype=np.float64),
        )
    if kind == EASY_ENSEMBLE:
        return EasyEnsembleModel(
            kind=kind,
            members=tuple(model_from_json_dict(b) for b in d["members"]),
            n_features=int(d["n_features"]),
        )
    raise ConfigError(f"unknown serialized model kind {kind!r}")


def sigmoid_scalar(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    ez = math.exp(z)
    return ez / (1.0 + ez)
