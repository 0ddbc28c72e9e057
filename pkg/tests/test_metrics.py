import math

import numpy as np
import pytest
from scipy import stats

from icdpipe.errors import ConfigError, DataError
from icdpipe.metrics import (
    ConfusionCounts,
    RocCurve,
    confusion,
    metric_suite,
    optimal_threshold,
    paired_test,
    roc_auc,
    roc_curve,
)


def suite_oracle(tp, fp, tn, fn):
    """Direct evaluation of the five point metrics, written independently."""
    total = tp + fp + tn + fn
    acc = (tp + tn) / total
    prec = tp / (tp + fp) if tp + fp else 0.0
    rec = tp / (tp + fn) if tp + fn else 0.0
    f1 = tp / (tp + (fp + fn) / 2) if tp + fp + fn else 0.0
    prod = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    mcc = (tp * tn - fp * fn) / math.sqrt(prod) if prod else 0.0
    return acc, prec, rec, f1, mcc


def labels_for_counts(tp, fp, tn, fn):
    yt = np.array([1] * tp + [0] * fp + [0] * tn + [1] * fn)
    yp = np.array([1] * tp + [1] * fp + [0] * tn + [0] * fn)
    return yt, yp


class TestConfusion:
    def test_perfect_two_rows(self):
        c = confusion(np.array([1, 0]), np.array([1, 0]))
        assert (c.tp, c.fp, c.tn, c.fn) == (1, 0, 1, 0)

    def test_flipping_predictions_swaps_counts(self, rng):
        yt = (rng.random(80) < 0.3).astype(int)
        yp = (rng.random(80) < 0.5).astype(int)
        c = confusion(yt, yp)
        flipped = confusion(yt, 1 - yp)
        assert (flipped.tp, flipped.fn) == (c.fn, c.tp)
        assert (flipped.tn, flipped.fp) == (c.fp, c.tn)

    def test_matches_per_row_counting(self, rng):
        for _ in range(200):
            n = int(rng.integers(1, 60))
            yt = (rng.random(n) < 0.4).astype(int)
            yp = (rng.random(n) < 0.4).astype(int)
            c = confusion(yt, yp)
            tp = fp = tn = fn = 0
            for t, p in zip(yt, yp):
                if t == 1 and p == 1:
                    tp += 1
                elif t == 0 and p == 1:
                    fp += 1
                elif t == 0 and p == 0:
                    tn += 1
                else:
                    fn += 1
            assert (c.tp, c.fp, c.tn, c.fn) == (tp, fp, tn, fn)

    def test_constructed_200_row_case(self):
        yt, yp = labels_for_counts(50, 10, 120, 20)
        c = confusion(yt, yp)
        assert (c.tp, c.fp, c.tn, c.fn) == (50, 10, 120, 20)
        assert c.total == 200

    def test_rejects_non_binary_labels(self):
        with pytest.raises(DataError):
            confusion(np.array([0, 2]), np.array([0, 1]))
        with pytest.raises(DataError):
            confusion(np.array([0, 1]), np.array([0, 1, 1]))


class TestMetricSuite:
    def test_pinned_counts(self):
        rep = metric_suite(ConfusionCounts(tp=50, fp=10, tn=120, fn=20))
        assert rep.accuracy == pytest.approx(0.85, abs=1e-12)
        assert rep.precision == pytest.approx(0.83333, abs=1e-5)
        assert rep.recall == pytest.approx(0.71429, abs=1e-5)
        assert rep.f1 == pytest.approx(0.76923, abs=1e-5)
        assert rep.mcc == pytest.approx(0.66339, abs=1e-5)
        assert rep.degenerate == ()

    def test_perfect_classifier(self):
        rep = metric_suite(ConfusionCounts(tp=5, fp=0, tn=7, fn=0))
        assert rep.accuracy == rep.precision == rep.recall == rep.f1 == 1.0
        assert rep.mcc == 1.0

    def test_all_negative_predictions(self):
        rep = metric_suite(ConfusionCounts(tp=0, fp=0, tn=6, fn=4))
        assert rep.recall == 0.0
        assert rep.precision == 0.0 and "precision" in rep.degenerate
        assert rep.mcc == 0.0 and "mcc" in rep.degenerate
        # fn > 0 keeps the F1 denominator positive, so 0 is earned
        assert rep.f1 == 0.0 and "f1" not in rep.degenerate
        assert "recall" not in rep.degenerate

    def test_matches_oracle_on_random_counts(self, rng):
        for _ in range(1000):
            tp, fp, tn, fn = (int(v) for v in rng.integers(0, 50, size=4))
            if tp + fp + tn + fn == 0:
                tp = 1
            rep = metric_suite(ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn))
            acc, prec, rec, f1, mcc = suite_oracle(tp, fp, tn, fn)
            assert abs(rep.accuracy - acc) <= 1e-12
            assert abs(rep.precision - prec) <= 1e-12
            assert abs(rep.recall - rec) <= 1e-12
            assert abs(rep.f1 - f1) <= 1e-12
            assert abs(rep.mcc - mcc) <= 1e-12

    def test_mcc_swap_invariant_f1_not(self):
        a = metric_suite(ConfusionCounts(tp=40, fp=5, tn=90, fn=15))
        b = metric_suite(ConfusionCounts(tp=90, fp=15, tn=40, fn=5))
        assert a.mcc == pytest.approx(b.mcc, abs=1e-12)
        assert a.f1 != pytest.approx(b.f1, abs=1e-6)

    def test_empty_counts_raise(self):
        with pytest.raises(DataError):
            metric_suite(ConfusionCounts(tp=0, fp=0, tn=0, fn=0))

    def test_values_scaling(self):
        rep = metric_suite(ConfusionCounts(tp=50, fp=10, tn=120, fn=20))
        vals = rep.values(scale=100.0)
        assert vals["accuracy"] == pytest.approx(85.0)
        assert "roc_auc" not in vals
        with_auc = rep.with_auc(0.9)
        assert with_auc.values(scale=100.0)["roc_auc"] == pytest.approx(90.0)

    def test_with_auc_flagging(self):
        rep = metric_suite(ConfusionCounts(tp=1, fp=1, tn=1, fn=1))
        assert rep.with_auc(0.5).degenerate == ()
        assert "roc_auc" in rep.with_auc(0.0, flagged=True).degenerate


class TestAuc:
    def test_perfect_ranking(self):
        y = np.array([0, 1, 0, 1, 1])
        assert roc_auc(y, y.astype(float)) == 1.0

    def test_all_scores_equal(self):
        y = np.array([0, 1, 0, 1])
        assert roc_auc(y, np.full(4, 0.3)) == 0.5

    def test_matches_pair_counting(self, rng):
        for _ in range(50):
            n = int(rng.integers(10, 120))
            y = (rng.random(n) < 0.35).astype(int)
            if y.all() or not y.any():
                y[0] = 1 - y[0]
            # single-decimal scores force plenty of ties
            s = np.round(rng.random(n), 1)
            pos = s[y == 1]
            neg = s[y == 0]
            wins = 0.0
            for sp in pos:
                for sn in neg:
                    if sp > sn:
                        wins += 1.0
                    elif sp == sn:
                        wins += 0.5
            expect = wins / (pos.size * neg.size)
            assert abs(roc_auc(y, s) - expect) <= 1e-12

    def test_equals_trapezoidal_integration_without_ties(self, rng):
        for _ in range(20):
            n = int(rng.integers(20, 150))
            y = (rng.random(n) < 0.4).astype(int)
            if y.all() or not y.any():
                y[0] = 1 - y[0]
            s = rng.normal(size=n)
            assert np.unique(s).size == n
            curve = roc_curve(y, s)
            area = np.trapezoid(curve.tpr, curve.fpr)
            assert abs(roc_auc(y, s) - area) <= 1e-12

    def test_invariant_under_monotone_transforms(self, rng):
        for _ in range(100):
            n = int(rng.integers(15, 80))
            y = (rng.random(n) < 0.4).astype(int)
            if y.all() or not y.any():
                y[0] = 1 - y[0]
            s = rng.normal(size=n)
            base = roc_auc(y, s)
            for f in (lambda x: 2.0 * x + 1.0, np.tanh, lambda x: x**3):
                assert abs(roc_auc(y, f(s)) - base) <= 1e-12

    def test_random_scores_near_half(self):
        for seed in (0, 1, 2):
            r = np.random.default_rng(seed)
            y = (r.random(2000) < 0.5).astype(int)
            auc = roc_auc(y, r.random(2000))
            assert 0.47 <= auc <= 0.53

    def test_input_validation(self):
        with pytest.raises(DataError):
            roc_auc(np.array([1, 1, 1]), np.array([0.1, 0.2, 0.3]))
        with pytest.raises(DataError):
            roc_auc(np.array([0, 1]), np.array([0.1, np.nan]))
        with pytest.raises(DataError):
            roc_auc(np.array([0, 1]), np.array([0.1, 0.2, 0.3]))


class TestRocCurve:
    def test_endpoints(self, rng):
        y = (rng.random(40) < 0.3).astype(int)
        y[0] = 1
        y[1] = 0
        s = rng.random(40)
        curve = roc_curve(y, s)
        assert math.isinf(curve.thresholds[0])
        assert curve.fpr[0] == 0.0 and curve.tpr[0] == 0.0
        assert curve.thresholds[-1] == s.min()
        assert curve.fpr[-1] == 1.0 and curve.tpr[-1] == 1.0

    def test_monotone_and_matches_brute_force(self, rng):
        for _ in range(25):
            n = int(rng.integers(10, 80))
            y = (rng.random(n) < 0.4).astype(int)
            if y.all() or not y.any():
                y[0] = 1 - y[0]
            s = np.round(rng.random(n), 1)
            curve = roc_curve(y, s)
            assert (np.diff(curve.fpr) >= 0).all()
            assert (np.diff(curve.tpr) >= 0).all()
            n_pos = y.sum()
            n_neg = y.size - n_pos
            for thr, fpr, tpr in zip(curve.thresholds, curve.fpr, curve.tpr):
                pred = (s >= thr).astype(int)
                tp = int(((y == 1) & (pred == 1)).sum())
                fp = int(((y == 0) & (pred == 1)).sum())
                assert fpr == pytest.approx(fp / n_neg, abs=1e-12)
                assert tpr == pytest.approx(tp / n_pos, abs=1e-12)

    def test_one_point_per_distinct_score(self, rng):
        s = np.array([0.2, 0.2, 0.7, 0.7, 0.5])
        y = np.array([0, 1, 1, 1, 0])
        curve = roc_curve(y, s)
        assert curve.thresholds.size == 4
        assert curve.thresholds[1:].tolist() == [0.7, 0.5, 0.2]


class TestOptimalThreshold:
    def test_separable_scores(self):
        y = np.array([0, 0, 0, 1, 1])
        s = np.array([0.1, 0.15, 0.2, 0.9, 0.95])
        curve = roc_curve(y, s)
        thr = optimal_threshold(curve)
        assert thr == 0.9
        pred = s >= thr
        assert pred[y == 1].all() and not pred[y == 0].any()

    def test_youden_tie_takes_lower_threshold(self):
        curve = RocCurve(
            thresholds=np.array([math.inf, 0.8, 0.6, 0.4]),
            fpr=np.array([0.0, 0.0, 0.25, 1.0]),
            tpr=np.array([0.0, 0.5, 0.75, 1.0]),
        )
        # J is 0.5 at both 0.8 and 0.6
        assert optimal_threshold(curve) == 0.6

    def test_constructed_curve_optimum(self):
        curve = RocCurve(
            thresholds=np.array([math.inf, 0.9, 0.6, 0.2]),
            fpr=np.array([0.0, 0.1, 0.2, 1.0]),
            tpr=np.array([0.0, 0.3, 0.9, 1.0]),
        )
        assert optimal_threshold(curve) == 0.6

    def test_target_tpr_takes_largest_reaching_threshold(self):
        curve = RocCurve(
            thresholds=np.array([math.inf, 0.9, 0.7, 0.5, 0.3]),
            fpr=np.array([0.0, 0.05, 0.1, 0.4, 1.0]),
            tpr=np.array([0.0, 0.25, 0.5, 0.75, 1.0]),
        )
        assert optimal_threshold(curve, criterion="target_tpr", target=0.5) == 0.7
        assert optimal_threshold(curve, criterion="target_tpr", target=0.6) == 0.5

    def test_target_tpr_full_recall(self, rng):
        y = (rng.random(50) < 0.3).astype(int)
        y[:2] = (1, 0)
        s = rng.random(50)
        curve = roc_curve(y, s)
        thr = optimal_threshold(curve, criterion="target_tpr", target=1.0)
        assert thr <= s[y == 1].min()

    def test_errors(self):
        curve = RocCurve(
            thresholds=np.array([math.inf, 0.5]),
            fpr=np.array([0.0, 1.0]),
            tpr=np.array([0.0, 1.0]),
        )
        with pytest.raises(ConfigError):
            optimal_threshold(curve, criterion="target_tpr")
        with pytest.raises(ConfigError):
            optimal_threshold(curve, criterion="target_tpr", target=1.5)
        with pytest.raises(ConfigError):
            optimal_threshold(curve, criterion="closest_corner")
        degenerate = RocCurve(
            thresholds=np.array([math.inf]),
            fpr=np.array([0.0]),
            tpr=np.array([0.0]),
        )
        with pytest.raises(DataError):
            optimal_threshold(degenerate)


class TestPairedTest:
    def test_exact_branch_matches_scipy(self, rng):
        for n in (8, 12, 19):
            a = rng.normal(size=n)
            b = a + rng.normal(scale=0.5, size=n)
            res = paired_test(a, b)
            assert res.test_name == "wilcoxon_signed_rank_exact"
            ref = stats.wilcoxon(b, a, alternative="two-sided", method="exact")
            assert res.p_value == pytest.approx(ref.pvalue, rel=1e-12)
            assert res.statistic == pytest.approx(ref.statistic, abs=1e-12)

    def test_normal_branch_matches_scipy(self, rng):
        for n in (20, 30, 45):
            a = rng.normal(size=n)
            b = a + rng.normal(scale=0.5, size=n)
            res = paired_test(a, b)
            assert res.test_name == "wilcoxon_signed_rank_normal"
            ref = stats.wilcoxon(
                b, a, alternative="two-sided", method="approx", correction=True
            )
            assert res.p_value == pytest.approx(ref.pvalue, rel=1e-12)

    def test_normal_branch_with_ties_matches_scipy(self, rng):
        a = np.zeros(25)
        b = np.round(rng.normal(scale=2.0, size=25), 0)
        b[b == 0.0] = 1.0
        res = paired_test(a, b)
        ref = stats.wilcoxon(
            b, a, alternative="two-sided", method="approx", correction=True
        )
        assert res.p_value == pytest.approx(ref.pvalue, rel=1e-12)

    def test_zero_differences_dropped(self, rng):
        a = rng.normal(size=12)
        b = a.copy()
        b[:9] = a[:9] + rng.normal(scale=0.4, size=9)
        res = paired_test(a, b)
        ref = stats.wilcoxon(
            b, a, alternative="two-sided", method="exact", zero_method="wilcox"
        )
        assert res.test_name == "wilcoxon_signed_rank_exact"
        assert res.p_value == pytest.approx(ref.pvalue, rel=1e-12)

    def test_identical_arrays_flagged(self, rng):
        a = rng.normal(size=10)
        res = paired_test(a, a.copy())
        assert res.degenerate
        assert res.p_value == 1.0
        assert res.statistic == 0.0

    def test_constant_shift_is_significant(self, rng):
        a = rng.normal(size=30)
        res = paired_test(a, a + 0.5)
        assert res.p_value < 0.01

    def test_balanced_signs_not_significant(self):
        a = np.zeros(8)
        b = np.array([1.0, -1.0, 2.0, -2.0, 3.0, -3.0, 4.0, -4.0])
        res = paired_test(a, b)
        assert res.p_value > 0.5

    def test_input_validation(self, rng):
        with pytest.raises(ConfigError):
            paired_test(np.zeros(5), np.ones(5))
        with pytest.raises(DataError):
            paired_test(np.zeros(8), np.ones(9))
