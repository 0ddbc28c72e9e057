"""Parent-level feature ranking and selection.

Selection decisions are made on original (pre-encoding) features even when
the estimators consume one-hot encodings: per-column scores are aggregated
back to each parent feature and elimination drops whole parents.  Callers
either hand over a raw table (encoded internally) or an already encoded
table plus a column->parent map.  Rankings and selections are pure
functions of (data, config, seed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ._rng import derive_seed, rng_for
from .dataset import (
    DataTable,
    FeatureSchema,
    LabeledDataset,
    stratified_fold_assignment,
)
from .errors import ConfigError, DataError
from .metrics import confusion, metric_suite
from .models import (
    EASY_ENSEMBLE,
    ModelConfig,
    column_ranking,
    feature_importances,
    make_config,
    predict,
    train,
)
from .transforms import apply_one_hot, fit_one_hot

LOWER_IS_BETTER = "lower_is_better"
HIGHER_IS_BETTER = "higher_is_better"

DEFAULT_RFE_ESTIMATOR_PARAMS = {"n_trees": 25, "max_depth": 8}


@dataclass(frozen=True)
class FeatureRanking:
    """One score per parent feature, in schema order."""

    method: str
    direction: str
    scores: dict[str, float]
    degenerate: tuple[str, ...] = ()

    def order(self) -> list[str]:
        """Best-first feature names; degenerate features always rank last.

        Ties keep schema order.
        """
        names = list(self.scores)
        pos = {n: i for i, n in enumerate(names)}
        sign = 1.0 if self.direction == LOWER_IS_BETTER else -1.0
        live = [n for n in names if n not in self.degenerate]
        dead = [n for n in names if n in self.degenerate]
        live.sort(key=lambda n: (sign * self.scores[n], pos[n]))
        return live + dead


@dataclass(frozen=True)
class SelectionResult:
    kept: tuple[str, ...]
    method: str
    config: dict = field(default_factory=dict)
    iteration_scores: tuple[dict, ...] = ()

    def to_json_dict(self) -> dict:
        return {
            "method": self.method,
            "config": dict(self.config),
            "kept": list(self.kept),
            "iterations": [dict(it) for it in self.iteration_scores],
        }


@dataclass(frozen=True)
class _EncodedView:
    """Numeric matrix plus the bookkeeping that ties columns to parents."""

    X: np.ndarray
    col_names: tuple[str, ...]
    parent_of: dict[str, str]
    parent_order: tuple[str, ...]

    def columns_of(self, parents) -> np.ndarray:
        wanted = set(parents)
        return np.asarray(
            [i for i, c in enumerate(self.col_names) if self.parent_of[c] in wanted],
            dtype=np.int64,
        )


def _encode_view(table: DataTable, parent_map: dict[str, str] | None) -> _EncodedView:
    if not table.is_complete:
        raise DataError("feature ranking requires a table with no missing cells")
    if parent_map is None:
        omap = fit_one_hot(table)
        encoded = apply_one_hot(omap, table)
        return _EncodedView(
            X=encoded.numeric_matrix(),
            col_names=encoded.schema.names,
            parent_of=omap.parents(),
            parent_order=table.schema.names,
        )
    names = table.schema.names
    missing = [n for n in names if n not in parent_map]
    if missing:
        raise ConfigError(f"parent_map lacks entries for columns {missing}")
    order: list[str] = []
    for n in names:
        if parent_map[n] not in order:
            order.append(parent_map[n])
    return _EncodedView(
        X=table.numeric_matrix(),
        col_names=names,
        parent_of={n: parent_map[n] for n in names},
        parent_order=tuple(order),
    )


def _aggregate(view: _EncodedView, column_scores: np.ndarray, how: str) -> dict[str, float]:
    sums = {p: 0.0 for p in view.parent_order}
    counts = {p: 0 for p in view.parent_order}
    for ci, cname in enumerate(view.col_names):
        p = view.parent_of[cname]
        sums[p] += float(column_scores[ci])
        counts[p] += 1
    if how == "sum":
        return sums
    return {p: sums[p] / counts[p] for p in view.parent_order}


def _constant_columns(X: np.ndarray) -> np.ndarray:
    return np.asarray([np.unique(X[:, j]).size <= 1 for j in range(X.shape[1])])


def laplacian_score(
    table: DataTable, k_graph: int = 5, parent_map: dict[str, str] | None = None
) -> FeatureRanking:
    """Locality-preservation score per parent feature; lower is better.

    Builds a symmetrized k-nearest-neighbor graph with heat-kernel weights
    (bandwidth = mean squared distance over kept edges), then scores each
    encoded column by the ratio of graph-local variation to overall
    variation; a parent's score is the mean over its non-constant columns.
    """
    n = table.n_rows
    if n <= k_graph:
        raise DataError(f"laplacian score needs more than {k_graph} rows, got {n}")
    view = _encode_view(table, parent_map)
    X = view.X

    sq = (X * X).sum(axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    np.maximum(d2, 0.0, out=d2)
    idx = np.arange(n)
    adj = np.zeros((n, n), dtype=bool)
    for i in range(n):
        row = d2[i].copy()
        row[i] = np.inf
        nn = np.lexsort((idx, row))[:k_graph]
        adj[i, nn] = True
    adj |= adj.T

    edge_d2 = d2[adj]
    t = float(edge_d2.mean()) if edge_d2.size else 1.0
    if t <= 0.0:
        t = 1.0
    W = np.where(adj, np.exp(-d2 / t), 0.0)
    deg = W.sum(axis=1)
    total_deg = float(deg.sum())

    col_scores = np.zeros(X.shape[1])
    col_degenerate = np.zeros(X.shape[1], dtype=bool)
    for ci in range(X.shape[1]):
        f = X[:, ci]
        f_tilde = f - float(f @ deg) / total_deg
        denom = float(f_tilde @ (deg * f_tilde))
        if denom <= 1e-12:
            col_degenerate[ci] = True
            continue
        # f^T L f with L = diag(deg) - W
        numer = denom - float(f_tilde @ (W @ f_tilde))
        col_scores[ci] = numer / denom

    scores: dict[str, float] = {}
    degenerate: list[str] = []
    for pname in view.parent_order:
        children = [i for i, c in enumerate(view.col_names) if view.parent_of[c] == pname]
        live = [i for i in children if not col_degenerate[i]]
        if not live:
            scores[pname] = 0.0
            degenerate.append(pname)
        else:
            scores[pname] = float(np.mean([col_scores[i] for i in live]))
    return FeatureRanking(
        method="laplacian",
        direction=LOWER_IS_BETTER,
        scores=scores,
        degenerate=tuple(degenerate),
    )


def tree_importance(
    ds: LabeledDataset,
    forest_config: ModelConfig | None = None,
    parent_map: dict[str, str] | None = None,
) -> FeatureRanking:
    """Impurity-decrease importance per parent feature; higher is better.

    Importances are normalized to sum 1 over columns, then summed into
    parents, so the parent totals preserve the overall mass.
    """
    if ds.is_single_class:
        raise DataError("tree importance needs both classes present")
    if forest_config is None:
        forest_config = make_config("random_forest")
    view = _encode_view(ds.table, parent_map)
    model = train(forest_config, view.X, ds.labels)
    imp = feature_importances(model)
    scores = _aggregate(view, imp, "sum")
    const = _constant_columns(view.X)
    degenerate = []
    for pname in view.parent_order:
        children = [i for i, c in enumerate(view.col_names) if view.parent_of[c] == pname]
        if all(const[i] for i in children):
            degenerate.append(pname)
    return FeatureRanking(
        method="tree_importance",
        direction=HIGHER_IS_BETTER,
        scores=scores,
        degenerate=tuple(degenerate),
    )


def select_top_fraction(ranking: FeatureRanking, fraction: float) -> SelectionResult:
    """Keep floor(fraction * p) best-ranked features, at least 1."""
    if not 0.0 < fraction <= 1.0:
        raise ConfigError(f"fraction must lie in (0, 1], got {fraction}")
    ordered = ranking.order()
    n_keep = max(1, math.floor(fraction * len(ordered)))
    return SelectionResult(
        kept=tuple(ordered[:n_keep]),
        method=ranking.method,
        config={"fraction": fraction, "direction": ranking.direction},
    )


def subset_features(table: DataTable, names) -> DataTable:
    """Restrict a table to the named features, keeping schema order."""
    wanted = set(names)
    keep = [f for f in table.schema.features if f.name in wanted]
    if not keep:
        raise ConfigError("feature subset would be empty")
    schema = FeatureSchema(
        features=tuple(keep),
        label_column=table.schema.label_column,
        positive_label=table.schema.positive_label,
    )
    cols = {f.name: table.column(f.name) for f in keep}
    mask = {f.name: table.mask(f.name) for f in keep}
    return DataTable.build(schema, cols, mask)


def subset_dataset(ds: LabeledDataset, names) -> LabeledDataset:
    return replace(ds, table=subset_features(ds.table, names))


def _rfe_fold(
    cfg: ModelConfig,
    view: _EncodedView,
    active_cols: np.ndarray,
    labels: np.ndarray,
    va_mask: np.ndarray,
    scoring: str,
    active_parents: list[str],
) -> tuple[float, dict[str, float]]:
    X_tr = view.X[np.ix_(~va_mask, active_cols)]
    X_va = view.X[np.ix_(va_mask, active_cols)]
    model = train(cfg, X_tr, labels[~va_mask])
    preds = predict(model, X_va)
    rep = metric_suite(confusion(labels[va_mask], preds))
    value = rep.f1 if scoring == "f1" else rep.mcc
    cols = column_ranking(model)
    parent_scores = {p: 0.0 for p in active_parents}
    for k, ci in enumerate(active_cols):
        parent_scores[view.parent_of[view.col_names[ci]]] += float(cols[k])
    return value, parent_scores


def rfe(
    ds: LabeledDataset,
    estimator_kind: str = "random_forest",
    step: int = 1,
    inner_cv: int = 3,
    scoring: str = "f1",
    seed: int = 0,
    estimator_params: dict | None = None,
    parent_map: dict[str, str] | None = None,
) -> SelectionResult:
    """Recursive elimination of the weakest parent features.

    Each iteration scores the current subset by inner stratified CV and
    ranks parents by the fold-sum of the estimator's aggregated column
    relevances; the ``step`` weakest are dropped.  The subset size with the
    best mean CV score wins, smaller size on ties.
    """
    if ds.is_single_class:
        raise DataError("rfe needs both classes present")
    if estimator_kind == EASY_ENSEMBLE:
        raise ConfigError("easy_ensemble provides no per-feature ranking for rfe")
    if step < 1:
        raise ConfigError("rfe step must be >= 1")
    if inner_cv < 2:
        raise ConfigError("rfe needs inner_cv >= 2")
    if scoring not in ("f1", "mcc"):
        raise ConfigError(f"unsupported rfe scoring {scoring!r}")
    if estimator_params is None and estimator_kind == "random_forest":
        estimator_params = dict(DEFAULT_RFE_ESTIMATOR_PARAMS)
    estimator_params = dict(estimator_params or {})
    make_config(estimator_kind, **estimator_params)  # validate once up front

    view = _encode_view(ds.table, parent_map)
    labels = np.asarray(ds.labels)
    n_min = min(int((labels == 1).sum()), int((labels == 0).sum()))
    if n_min < inner_cv:
        raise DataError(f"minority class ({n_min}) too small for {inner_cv} inner folds")
    assignment = stratified_fold_assignment(labels, inner_cv, rng_for(seed, 0))

    features = list(view.parent_order)
    schema_pos = {name: i for i, name in enumerate(view.parent_order)}
    iterations: list[dict] = []
    subsets: list[tuple[str, ...]] = []
    it = 0
    while True:
        active_cols = view.columns_of(features)
        fold_scores = []
        rank_acc = {name: 0.0 for name in features}
        for f in range(inner_cv):
            cfg = make_config(
                estimator_kind, seed=derive_seed(seed, it + 1, f), **estimator_params
            )
            val, parent_scores = _rfe_fold(
                cfg, view, active_cols, labels, assignment == f, scoring, features
            )
            fold_scores.append(val)
            for name in features:
                rank_acc[name] += parent_scores[name]
        iterations.append(
            {
                "n_features": len(features),
                "mean_score": float(np.mean(fold_scores)),
                "fold_scores": [float(v) for v in fold_scores],
            }
        )
        subsets.append(tuple(features))
        if len(features) - step < 1:
            break
        # drop the `step` weakest; ties keep the earlier-in-schema feature
        by_strength = sorted(features, key=lambda n: (-rank_acc[n], schema_pos[n]))
        survivors = set(by_strength[:-step])
        features = [n for n in features if n in survivors]
        it += 1

    best = 0
    for i in range(1, len(iterations)):
        # larger index = smaller subset; >= prefers the smaller one on ties
        if iterations[i]["mean_score"] >= iterations[best]["mean_score"]:
            best = i
    return SelectionResult(
        kept=subsets[best],
        method="rfe",
        config={
            "estimator_kind": estimator_kind,
            "estimator_params": estimator_params,
            "step": step,
            "inner_cv": inner_cv,
            "scoring": scoring,
            "seed": seed,
        },
        iteration_scores=tuple(iterations),
    )
