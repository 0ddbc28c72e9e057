"""Exhaustive hyperparameter search with inner stratified CV."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .._rng import derive_seed, rng_for
from ..dataset import stratified_fold_assignment
from ..errors import ConfigError, DataError
from ..metrics import confusion, metric_suite, roc_auc
from .base import predict, score
from .config import LINEAR_SVM, ModelConfig, make_config
from .fit import train

GRID_SCORINGS = ("f1", "mcc", "roc_auc")


@dataclass(frozen=True)
class GridSpec:
    """Per-hyperparameter candidate lists, expanded exhaustively."""

    kind: str
    grid: dict[str, tuple] = field(default_factory=dict)
    scoring: str = "f1"
    cv_folds: int = 3

    def combinations(self) -> list[dict]:
        keys = list(self.grid)
        out = []
        for values in itertools.product(*(self.grid[k] for k in keys)):
            out.append(dict(zip(keys, values)))
        return out


def _fold_metric(spec: GridSpec, cfg: ModelConfig, X_tr, y_tr, X_va, y_va) -> float:
    model = train(cfg, X_tr, y_tr)
    if spec.scoring == "roc_auc":
        return roc_auc(y_va, score(model, X_va))
    preds = predict(model, X_va)
    report = metric_suite(confusion(y_va, preds))
    return report.f1 if spec.scoring == "f1" else report.mcc


def grid_search(
    spec: GridSpec, X: np.ndarray, y: np.ndarray, seed: int = 0
) -> tuple[ModelConfig, list[dict]]:
    """Evaluate every combination; ties keep the earliest in grid order."""
    if not spec.grid or any(len(v) == 0 for v in spec.grid.values()):
        raise ConfigError("grid search needs at least one non-empty candidate list")
    if spec.scoring not in GRID_SCORINGS:
        raise ConfigError(f"unknown grid scoring {spec.scoring!r}")
    if spec.cv_folds < 2:
        raise ConfigError("grid search needs cv_folds >= 2")
    y = np.asarray(y).astype(np.int8)
    combos = spec.combinations()
    for combo in combos:
        make_config(spec.kind, **combo)  # fail fast on bad candidates

    n_min = min(int((y == 1).sum()), int((y == 0).sum()))
    if n_min < spec.cv_folds:
        raise DataError(
            f"minority class ({n_min}) too small for {spec.cv_folds} inner folds"
        )
    assignment = stratified_fold_assignment(y, spec.cv_folds, rng_for(seed, 0))

    results: list[dict] = []
    best_i = -1
    best_mean = -np.inf
    for i, combo in enumerate(combos):
        fold_scores = []
        for f in range(spec.cv_folds):
            va = assignment == f
            cfg = make_config(spec.kind, seed=derive_seed(seed, i + 1, f), **combo)
            fold_scores.append(
                _fold_metric(spec, cfg, X[~va], y[~va], X[va], y[va])
            )
        mean = float(np.mean(fold_scores))
        results.append(
            {"params": dict(combo), "mean_score": mean, "fold_scores": fold_scores}
        )
        if mean > best_mean:
            best_mean = mean
            best_i = i
    best = make_config(spec.kind, seed=seed, **combos[best_i])
    return best, results


def default_grid(kind: str) -> GridSpec:
    """Small documented grids; scoring F1 throughout."""
    if kind == "logistic_regression":
        return GridSpec(kind=kind, grid={"l2": (0.001, 0.01, 0.1)})
    if kind == LINEAR_SVM:
        return GridSpec(kind=kind, grid={"l2": (0.001, 0.01, 0.1)})
    if kind == "random_forest":
        return GridSpec(kind=kind, grid={"n_trees": (100, 300), "max_depth": (None, 10)})
    if kind == "boosted_trees":
        return GridSpec(kind=kind, grid={"n_rounds": (100, 300), "shrinkage": (0.05, 0.1)})
    if kind == "easy_ensemble":
        return GridSpec(kind=kind, grid={"ee_subsets": (10, 20), "n_rounds": (10, 20)})
    raise ConfigError(f"unknown model kind {kind!r}")
