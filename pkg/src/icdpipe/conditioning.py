"""Training-partition conditioning: density outlier removal and resampling.

Everything here consumes a fully encoded numeric matrix and must only ever
see training rows; the pipeline enforces that validation partitions pass
through untouched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._rng import rng_for
from .errors import ConfigError, DataError

_DIST_EPS = 1e-10


@dataclass(frozen=True)
class LofConfig:
    n_neighbors: int = 2
    score_threshold: float = 1.5

    def __post_init__(self):
        if self.n_neighbors < 1:
            raise ConfigError("lof needs n_neighbors >= 1")
        if self.score_threshold <= 1.0:
            raise ConfigError("lof score_threshold must exceed 1")


@dataclass(frozen=True)
class ResamplePlan:
    target_mu: float = 0.7
    smote_k: int = 5
    tomek_policy: str = "remove_majority"
    seed: int = 0
    smote_first: bool = False

    def __post_init__(self):
        if not 0.0 < self.target_mu <= 1.0:
            raise ConfigError("target_mu must lie in (0, 1]")
        if self.smote_k < 1:
            raise ConfigError("smote_k must be >= 1")
        if self.tomek_policy != "remove_majority":
            raise ConfigError(f"unknown tomek_policy {self.tomek_policy!r}")

    def to_json_dict(self) -> dict:
        return {
            "target_mu": self.target_mu,
            "smote_k": self.smote_k,
            "tomek_policy": self.tomek_policy,
            "seed": self.seed,
            "smote_first": self.smote_first,
        }


@dataclass(frozen=True)
class ResampleReport:
    n_majority_before: int
    n_minority_before: int
    n_majority_after: int
    n_minority_after: int
    n_tomek_removed: int
    n_synthetic: int
    ratio_already_met: bool = False

    def to_json_dict(self) -> dict:
        return {
            "n_majority_before": self.n_majority_before,
            "n_minority_before": self.n_minority_before,
            "n_majority_after": self.n_majority_after,
            "n_minority_after": self.n_minority_after,
            "n_tomek_removed": self.n_tomek_removed,
            "n_synthetic": self.n_synthetic,
            "ratio_already_met": self.ratio_already_met,
        }


def _check_matrix(X: np.ndarray) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DataError("expected a non-empty 2-d numeric matrix")
    if not np.isfinite(X).all():
        raise DataError("matrix contains non-finite values")
    return X


def _pairwise_distances(X: np.ndarray) -> np.ndarray:
    sq = (X * X).sum(axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    np.maximum(d2, 0.0, out=d2)
    return np.sqrt(d2)


def _knn_of_all(D: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """k nearest neighbor indices (excluding self) and distances per row.

    Ties in distance resolve toward the lower row index, so results do not
    depend on any sorting accident.
    """
    n = D.shape[0]
    idx = np.arange(n)
    neigh = np.empty((n, k), dtype=np.int64)
    dist = np.empty((n, k), dtype=np.float64)
    for i in range(n):
        row = D[i].copy()
        row[i] = np.inf
        order = np.lexsort((idx, row))[:k]
        neigh[i] = order
        dist[i] = row[order]
    return neigh, dist


def lof_scores(X: np.ndarray, n_neighbors: int) -> np.ndarray:
    """Local outlier factor per row; ~1 in uniform-density regions."""
    X = _check_matrix(X)
    n = X.shape[0]
    if n <= n_neighbors:
        raise DataError(f"lof needs more than {n_neighbors} rows, got {n}")
    D = _pairwise_distances(X)
    neigh, dist = _knn_of_all(D, n_neighbors)
    k_distance = dist[:, -1]
    # reachability distance of i from neighbor j: max(k_distance[j], d(i, j)),
    # floored to keep duplicate points from collapsing densities to infinity
    reach = np.maximum(k_distance[neigh], dist)
    np.maximum(reach, _DIST_EPS, out=reach)
    lrd = 1.0 / reach.mean(axis=1)
    return (lrd[neigh].mean(axis=1) / lrd).astype(np.float64)


def remove_outliers(
    X: np.ndarray, y: np.ndarray, cfg: LofConfig
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Drop rows scoring above the LOF threshold.

    Returns (X_kept, y_kept, removed_row_indices).  Aborts rather than leave
    either class empty.
    """
    X = _check_matrix(X)
    y = np.asarray(y).astype(np.int8)
    if y.size != X.shape[0]:
        raise DataError("label length does not match matrix rows")
    scores = lof_scores(X, cfg.n_neighbors)
    removed = np.nonzero(scores > cfg.score_threshold)[0]
    keep = np.ones(X.shape[0], dtype=bool)
    keep[removed] = False
    for cls in (0, 1):
        before = int((y == cls).sum())
        after = int(((y == cls) & keep).sum())
        if before > 0 and after == 0:
            raise DataError(
                f"outlier removal would leave class {cls} empty "
                f"({before} rows all above threshold)"
            )
    return X[keep], y[keep], removed


def find_tomek_links(X: np.ndarray, y: np.ndarray) -> list[tuple[int, int]]:
    """Mutual-1-NN cross-class pairs (i, j) with i < j."""
    X = _check_matrix(X)
    y = np.asarray(y).astype(np.int8)
    if y.size != X.shape[0]:
        raise DataError("label length does not match matrix rows")
    if (y == y[0]).all():
        raise DataError("tomek links need both classes present")
    D = _pairwise_distances(X)
    nn1, _ = _knn_of_all(D, 1)
    nn1 = nn1[:, 0]
    links = []
    for i in range(y.size):
        j = int(nn1[i])
        if i < j and int(nn1[j]) == i and y[i] != y[j]:
            links.append((i, j))
    return links


def smote_oversample(
    X_min: np.ndarray, n_synthetic: int, k: int, seed: int
) -> np.ndarray:
    """Interpolated minority rows; parents cycle round-robin over X_min."""
    X_min = _check_matrix(X_min)
    n = X_min.shape[0]
    if n <= k:
        raise DataError(f"smote needs more than k={k} minority rows, got {n}")
    if n_synthetic < 0:
        raise ConfigError("n_synthetic must be non-negative")
    out = np.empty((n_synthetic, X_min.shape[1]), dtype=np.float64)
    if n_synthetic == 0:
        return out
    D = _pairwise_distances(X_min)
    neigh, _ = _knn_of_all(D, k)
    for s in range(n_synthetic):
        parent = s % n
        rng = rng_for(seed, s)
        partner = int(neigh[parent][rng.integers(0, k)])
        u = rng.random()
        out[s] = X_min[parent] + u * (X_min[partner] - X_min[parent])
    return out


def smote_tomek(
    X: np.ndarray, y: np.ndarray, plan: ResamplePlan
) -> tuple[np.ndarray, np.ndarray, ResampleReport]:
    """Tomek-link cleaning plus SMOTE up to the target minority ratio.

    Default order removes links first, then oversamples; plan.smote_first
    flips the order.  The minority target is round-half-up of
    target_mu * majority-count after any removal.
    """
    X = _check_matrix(X)
    y = np.asarray(y).astype(np.int8)
    if y.size != X.shape[0]:
        raise DataError("label length does not match matrix rows")
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise DataError("resampling needs both classes present")
    minority_label = 1 if n_pos <= n_neg else 0
    n_min = min(n_pos, n_neg)
    n_maj = max(n_pos, n_neg)

    if n_min / n_maj >= plan.target_mu:
        report = ResampleReport(
            n_majority_before=n_maj,
            n_minority_before=n_min,
            n_majority_after=n_maj,
            n_minority_after=n_min,
            n_tomek_removed=0,
            n_synthetic=0,
            ratio_already_met=True,
        )
        return X, y, report

    def clean(Xc, yc):
        links = find_tomek_links(Xc, yc)
        drop = sorted({i if yc[i] != minority_label else j for i, j in links})
        keep = np.ones(yc.size, dtype=bool)
        keep[drop] = False
        return Xc[keep], yc[keep], len(drop)

    def oversample(Xc, yc):
        maj_count = int((yc != minority_label).sum())
        min_mask = yc == minority_label
        min_count = int(min_mask.sum())
        target = int(np.floor(plan.target_mu * maj_count + 0.5))
        n_syn = max(0, target - min_count)
        if n_syn == 0:
            return Xc, yc, 0
        synth = smote_oversample(Xc[min_mask], n_syn, plan.smote_k, plan.seed)
        Xr = np.vstack([Xc, synth])
        yr = np.concatenate([yc, np.full(n_syn, minority_label, dtype=np.int8)])
        return Xr, yr, n_syn

    if plan.smote_first:
        X1, y1, n_syn = oversample(X, y)
        X2, y2, n_removed = clean(X1, y1)
    else:
        X1, y1, n_removed = clean(X, y)
        X2, y2, n_syn = oversample(X1, y1)

    report = ResampleReport(
        n_majority_before=n_maj,
        n_minority_before=n_min,
        n_majority_after=int((y2 != minority_label).sum()),
        n_minority_after=int((y2 == minority_label).sum()),
        n_tomek_removed=n_removed,
        n_synthetic=n_syn,
    )
    return X2, y2, report
