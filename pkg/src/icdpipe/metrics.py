"""Binary-classification metrics, ROC analysis, and paired fold tests.

All functions are pure.  Internal metric values live in [0, 1] (MCC in
[-1, 1]); percent scaling happens only at the reporting layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, DataError

YOUDEN = "youden"
TARGET_TPR = "target_tpr"

METRIC_NAMES = ("accuracy", "precision", "recall", "f1", "mcc", "roc_auc")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class MetricReport:
    """Point metrics plus the names of any that hit a 0/0 convention.

    A flagged metric reports 0.0 so downstream aggregation stays numeric,
    while the flag separates "earned zero" from "undefined".
    """

    accuracy: float
    precision: float
    recall: float
    f1: float
    mcc: float
    roc_auc: float | None = None
    degenerate: tuple[str, ...] = ()

    def with_auc(self, auc: float, flagged: bool = False) -> "MetricReport":
        flags = self.degenerate + ("roc_auc",) if flagged else self.degenerate
        return replace(self, roc_auc=auc, degenerate=flags)

    def values(self, scale: float = 1.0) -> dict[str, float]:
        out = {
            "accuracy": self.accuracy * scale,
            "precision": self.precision * scale,
            "recall": self.recall * scale,
            "f1": self.f1 * scale,
            "mcc": self.mcc * scale,
        }
        if self.roc_auc is not None:
            out["roc_auc"] = self.roc_auc * scale
        return out


def confusion(y_true: np.ndarray, y_pred: np.ndarray) -> ConfusionCounts:
    yt = np.asarray(y_true)
    yp = np.asarray(y_pred)
    if yt.shape != yp.shape or yt.ndim != 1:
        raise DataError("confusion needs two equal-length 1-d label arrays")
    yt = yt.astype(np.int64)
    yp = yp.astype(np.int64)
    for arr, which in ((yt, "truth"), (yp, "prediction")):
        bad = ~np.isin(arr, (0, 1))
        if bad.any():
            raise DataError(f"{which} labels must be 0/1")
    return ConfusionCounts(
        tp=int(((yt == 1) & (yp == 1)).sum()),
        fp=int(((yt == 0) & (yp == 1)).sum()),
        tn=int(((yt == 0) & (yp == 0)).sum()),
        fn=int(((yt == 1) & (yp == 0)).sum()),
    )


def metric_suite(c: ConfusionCounts) -> MetricReport:
    """Accuracy, precision, recall, F1, and MCC from one confusion matrix."""
    if c.total <= 0:
        raise DataError("metric_suite needs at least one evaluated row")
    flags: list[str] = []
    accuracy = (c.tp + c.tn) / c.total

    if c.tp + c.fp == 0:
        precision = 0.0
        flags.append("precision")
    else:
        precision = c.tp / (c.tp + c.fp)

    if c.tp + c.fn == 0:
        recall = 0.0
        flags.append("recall")
    else:
        recall = c.tp / (c.tp + c.fn)

    f1_den = c.tp + (c.fp + c.fn) / 2.0
    if f1_den == 0.0:
        f1 = 0.0
        flags.append("f1")
    else:
        f1 = c.tp / f1_den

    prod = (c.tp + c.fp) * (c.tp + c.fn) * (c.tn + c.fp) * (c.tn + c.fn)
    if prod == 0:
        mcc = 0.0
        flags.append("mcc")
    else:
        mcc = (c.tp * c.tn - c.fp * c.fn) / math.sqrt(prod)

    return MetricReport(
        accuracy=accuracy,
        precision=precision,
        recall=recall,
        f1=f1,
        mcc=mcc,
        degenerate=tuple(flags),
    )


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks; tied values share the mean of their rank range."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size, dtype=np.float64)
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def _check_scores(y_true: np.ndarray, scores: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    yt = np.asarray(y_true).astype(np.int64)
    sc = np.asarray(scores, dtype=np.float64)
    if yt.shape != sc.shape or yt.ndim != 1:
        raise DataError("need equal-length 1-d labels and scores")
    if not np.isfinite(sc).all():
        raise DataError("scores must be finite")
    if (yt == 1).all() or (yt == 0).all():
        raise DataError("ROC analysis needs both classes present")
    return yt, sc


def roc_auc(y_true: np.ndarray, scores: np.ndarray) -> float:
    """Probability a random positive outscores a random negative (ties count half)."""
    yt, sc = _check_scores(y_true, scores)
    n_pos = int((yt == 1).sum())
    n_neg = yt.size - n_pos
    ranks = _average_ranks(sc)
    rank_sum_pos = float(ranks[yt == 1].sum())
    return (rank_sum_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


@dataclass(frozen=True)
class RocCurve:
    """Operating points from a descending sweep over distinct score thresholds.

    The first point is the predict-nothing endpoint (threshold +inf, fpr=0,
    tpr=0); the last threshold equals the minimum score and lands on (1, 1).
    A row is predicted positive when its score >= threshold.
    """

    thresholds: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray


def roc_curve(y_true: np.ndarray, scores: np.ndarray) -> RocCurve:
    yt, sc = _check_scores(y_true, scores)
    n_pos = int((yt == 1).sum())
    n_neg = yt.size - n_pos
    distinct = np.unique(sc)[::-1]
    thresholds = [math.inf]
    fpr = [0.0]
    tpr = [0.0]
    # cumulative counts down the sorted scores avoid an O(n^2) sweep
    order = np.argsort(-sc, kind="stable")
    sorted_scores = sc[order]
    sorted_pos = (yt[order] == 1).astype(np.int64)
    cum_pos = np.cumsum(sorted_pos)
    cum_all = np.arange(1, yt.size + 1)
    # last index of each distinct threshold in the sorted array
    boundary = np.searchsorted(-sorted_scores, -distinct, side="right") - 1
    for thr, idx in zip(distinct, boundary):
        tp = int(cum_pos[idx])
        fp = int(cum_all[idx] - tp)
        thresholds.append(float(thr))
        fpr.append(fp / n_neg)
        tpr.append(tp / n_pos)
    return RocCurve(
        thresholds=np.asarray(thresholds),
        fpr=np.asarray(fpr),
        tpr=np.asarray(tpr),
    )


def optimal_threshold(curve: RocCurve, criterion: str = YOUDEN, target: float | None = None) -> float:
    """Pick an operating threshold from a ROC curve.

    youden maximizes tpr - fpr (ties resolved toward the lower threshold);
    target_tpr returns the largest threshold whose tpr reaches the target,
    which is also the point of least fpr among those that reach it.
    """
    if curve.thresholds.size < 2:
        raise DataError("degenerate ROC curve")
    if criterion == YOUDEN:
        j = curve.tpr - curve.fpr
        best = 0
        for i in range(1, j.size):
            if j[i] >= j[best]:
                best = i
        return float(curve.thresholds[best])
    if criterion == TARGET_TPR:
        if target is None:
            raise ConfigError("target_tpr criterion needs a target value")
        for i in range(curve.tpr.size):
            if curve.tpr[i] >= target:
                return float(curve.thresholds[i])
        raise ConfigError(f"no threshold reaches tpr >= {target}")
    raise ConfigError(f"unknown threshold criterion {criterion!r}")


# ---------------------------------------------------------------------------
# paired fold comparison


@dataclass(frozen=True)
class PairedTestResult:
    statistic: float
    p_value: float
    n_pairs: int
    test_name: str
    degenerate: bool = False


def _exact_signed_rank_p(doubled_ranks: np.ndarray, w2_plus: int) -> float:
    """Two-sided exact p over all sign assignments, via a subset-sum count.

    Ranks arrive doubled so midpoint ties stay integral.
    """
    total = int(doubled_ranks.sum())
    counts = np.zeros(total + 1, dtype=np.float64)
    counts[0] = 1.0
    for r in doubled_ranks:
        r = int(r)
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[:-r] if r > 0 else counts
        counts = counts + shifted
    n_assign = counts.sum()
    p_low = counts[: w2_plus + 1].sum() / n_assign
    p_high = counts[w2_plus:].sum() / n_assign
    return min(1.0, 2.0 * min(p_low, p_high))


def _normal_signed_rank_p(ranks: np.ndarray, w_plus: float) -> float:
    m = ranks.size
    mean = m * (m + 1) / 4.0
    var = m * (m + 1) * (2 * m + 1) / 24.0
    # tie correction over groups of equal absolute differences
    _, tie_counts = np.unique(ranks, return_counts=True)
    var -= float(((tie_counts**3 - tie_counts) / 48.0).sum())
    if var <= 0.0:
        return 1.0
    delta = abs(w_plus - mean) - 0.5
    z = max(delta, 0.0) / math.sqrt(var)
    p = math.erfc(z / math.sqrt(2.0))
    return min(1.0, p)


def paired_test(a, b) -> PairedTestResult:
    """Two-sided Wilcoxon signed-rank test on aligned per-fold metrics.

    Zero differences are dropped.  The exact null distribution is enumerated
    below 20 informative pairs; the normal approximation (continuity and tie
    corrected) is used from 20 up.
    """
    av = np.asarray(a, dtype=np.float64)
    bv = np.asarray(b, dtype=np.float64)
    if av.shape != bv.shape or av.ndim != 1:
        raise DataError("paired_test needs two equal-length 1-d metric arrays")
    if av.size < 6:
        raise ConfigError("paired_test needs at least 6 pairs")
    d = bv - av
    d = d[d != 0.0]
    if d.size == 0:
        return PairedTestResult(
            statistic=0.0,
            p_value=1.0,
            n_pairs=av.size,
            test_name="wilcoxon_signed_rank",
            degenerate=True,
        )
    ranks = _average_ranks(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    statistic = min(w_plus, w_minus)
    if d.size < 20:
        doubled = np.rint(ranks * 2.0).astype(np.int64)
        w2_plus = int(round(w_plus * 2.0))
        p = _exact_signed_rank_p(doubled, w2_plus)
        name = "wilcoxon_signed_rank_exact"
    else:
        p = _normal_signed_rank_p(ranks, w_plus)
        name = "wilcoxon_signed_rank_normal"
    return PairedTestResult(
        statistic=statistic,
        p_value=float(p),
        n_pairs=av.size,
        test_name=name,
    )
