import numpy as np
import pytest

from icdpipe.conditioning import (
    LofConfig,
    ResamplePlan,
    find_tomek_links,
    lof_scores,
    remove_outliers,
    smote_oversample,
    smote_tomek,
)
from icdpipe.errors import ConfigError, DataError


def brute_force_lof(X, k, floor=1e-10):
    """Textbook LOF with explicit loops; distance ties break on row index."""
    n = X.shape[0]
    neighbors = []
    k_dist = np.empty(n)
    for i in range(n):
        d = [(np.linalg.norm(X[i] - X[j]), j) for j in range(n) if j != i]
        d.sort()
        neighbors.append([j for _, j in d[:k]])
        k_dist[i] = d[k - 1][0]
    lrd = np.empty(n)
    for i in range(n):
        reach = [
            max(max(k_dist[j], np.linalg.norm(X[i] - X[j])), floor)
            for j in neighbors[i]
        ]
        lrd[i] = 1.0 / np.mean(reach)
    return np.array([np.mean([lrd[j] for j in neighbors[i]]) / lrd[i] for i in range(n)])


def brute_force_tomek(X, y):
    n = X.shape[0]
    nn = []
    for i in range(n):
        d = [(np.linalg.norm(X[i] - X[j]), j) for j in range(n) if j != i]
        nn.append(min(d)[1])
    return [
        (i, nn[i])
        for i in range(n)
        if i < nn[i] and nn[nn[i]] == i and y[i] != y[nn[i]]
    ]


def separated_blobs(rng, n_maj, n_min, gap=50.0, p=2, spread=1.0):
    X = np.vstack(
        [
            rng.normal(scale=spread, size=(n_maj, p)),
            rng.normal(loc=gap, scale=spread, size=(n_min, p)),
        ]
    )
    y = np.concatenate([np.zeros(n_maj, dtype=np.int8), np.ones(n_min, dtype=np.int8)])
    return X, y


class TestLofScores:
    def test_unit_square_corners_near_one(self):
        X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
        scores = lof_scores(X, n_neighbors=2)
        assert np.all(np.abs(scores - 1.0) < 0.05)

    def test_far_point_scores_high(self, rng):
        X = np.vstack([rng.normal(scale=0.1, size=(20, 2)), [[10.0, 10.0]]])
        scores = lof_scores(X, n_neighbors=2)
        assert scores[-1] > 2.0
        assert np.all(scores[:-1] < scores[-1])

    def test_matches_brute_force_oracle(self, rng):
        for n, k in ((30, 2), (80, 3), (150, 5)):
            X = rng.normal(size=(n, 3))
            assert np.allclose(
                lof_scores(X, k), brute_force_lof(X, k), atol=1e-9
            )

    def test_duplicate_points_stay_finite(self, rng):
        X = rng.normal(size=(12, 2))
        X[5] = X[2]
        X[9] = X[2]
        scores = lof_scores(X, n_neighbors=2)
        assert np.isfinite(scores).all()

    def test_too_few_rows(self, rng):
        with pytest.raises(DataError):
            lof_scores(rng.normal(size=(3, 2)), n_neighbors=3)


class TestRemoveOutliers:
    def test_identity_when_nothing_exceeds_threshold(self):
        X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
        y = np.array([0, 0, 1, 1], dtype=np.int8)
        Xk, yk, removed = remove_outliers(X, y, LofConfig(n_neighbors=2))
        assert removed.size == 0
        assert np.array_equal(Xk, X) and np.array_equal(yk, y)

    def test_single_outlier_removed(self):
        # a regular grid has uniform density, so every cluster score is ~1
        gx, gy = np.mgrid[0:5, 0:4]
        X = np.vstack([np.column_stack([gx.ravel(), gy.ravel()]) * 0.01, [[10.0, 10.0]]])
        y = np.zeros(21, dtype=np.int8)
        y[:3] = 1
        Xk, yk, removed = remove_outliers(X, y, LofConfig(n_neighbors=2, score_threshold=1.5))
        assert removed.tolist() == [20]
        assert Xk.shape == (20, 2) and yk.size == 20

    def test_refuses_to_empty_a_class(self, rng):
        X = np.vstack([rng.normal(scale=0.1, size=(20, 2)), [[10.0, 10.0]]])
        y = np.zeros(21, dtype=np.int8)
        y[20] = 1
        with pytest.raises(DataError):
            remove_outliers(X, y, LofConfig(n_neighbors=2, score_threshold=1.5))

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            LofConfig(n_neighbors=0)
        with pytest.raises(ConfigError):
            LofConfig(score_threshold=1.0)

    def test_label_length_mismatch(self, rng):
        with pytest.raises(DataError):
            remove_outliers(rng.normal(size=(10, 2)), np.zeros(9), LofConfig())


class TestTomekLinks:
    def test_separated_clusters_have_no_links(self, rng):
        X, y = separated_blobs(rng, n_maj=30, n_min=10)
        assert find_tomek_links(X, y) == []

    def test_planted_boundary_pair_is_a_link(self, rng):
        min_cluster = rng.normal(scale=0.3, size=(15, 2))
        maj_cluster = rng.normal(loc=10.0, scale=0.3, size=(20, 2))
        X = np.vstack([min_cluster, [[4.95, 5.0]], maj_cluster, [[5.05, 5.0]]])
        y = np.concatenate([np.ones(16, dtype=np.int8), np.zeros(21, dtype=np.int8)])
        assert find_tomek_links(X, y) == [(15, 36)]

    def test_matches_brute_force_oracle(self, rng):
        for _ in range(10):
            n = int(rng.integers(20, 120))
            X = rng.normal(size=(n, 2))
            y = (rng.random(n) < 0.3).astype(np.int8)
            if y.all() or not y.any():
                y[0] = 1 - y[0]
            assert find_tomek_links(X, y) == brute_force_tomek(X, y)

    def test_single_class_rejected(self, rng):
        with pytest.raises(DataError):
            find_tomek_links(rng.normal(size=(8, 2)), np.zeros(8))


class TestSmoteOversample:
    def test_synthetics_lie_between_parent_pairs(self, rng):
        X_min = rng.normal(size=(20, 4))
        k = 3
        synth = smote_oversample(X_min, n_synthetic=30, k=k, seed=9)
        # recover each parent's neighborhood with a brute-force search
        neighborhoods = []
        for i in range(20):
            d = [(np.linalg.norm(X_min[i] - X_min[j]), j) for j in range(20) if j != i]
            d.sort()
            neighborhoods.append([j for _, j in d[:k]])
        for s in range(30):
            parent = X_min[s % 20]
            found = False
            for j in neighborhoods[s % 20]:
                partner = X_min[j]
                denom = partner - parent
                if np.any(denom == 0.0):
                    continue
                u = (synth[s] - parent) / denom
                if np.all(np.abs(u - u[0]) <= 1e-9) and -1e-12 <= u[0] <= 1 + 1e-12:
                    found = True
                    break
            assert found

    def test_identical_parents_collapse_to_the_point(self):
        X_min = np.array([[2.0, 3.0], [2.0, 3.0]])
        synth = smote_oversample(X_min, n_synthetic=8, k=1, seed=1)
        assert np.allclose(synth, [2.0, 3.0])

    def test_count_contract(self, rng):
        X_min = rng.normal(size=(16, 3))
        assert smote_oversample(X_min, 54, k=5, seed=0).shape == (54, 3)
        assert smote_oversample(X_min, 0, k=5, seed=0).shape == (0, 3)

    def test_deterministic_in_seed(self, rng):
        X_min = rng.normal(size=(12, 3))
        a = smote_oversample(X_min, 20, k=4, seed=5)
        b = smote_oversample(X_min, 20, k=4, seed=5)
        c = smote_oversample(X_min, 20, k=4, seed=6)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_errors(self, rng):
        with pytest.raises(DataError):
            smote_oversample(rng.normal(size=(5, 2)), 10, k=5, seed=0)
        with pytest.raises(ConfigError):
            smote_oversample(rng.normal(size=(8, 2)), -1, k=3, seed=0)


class TestSmoteTomek:
    def test_target_ratio_arithmetic_without_links(self, rng):
        X, y = separated_blobs(rng, n_maj=100, n_min=16)
        Xr, yr, report = smote_tomek(X, y, ResamplePlan(target_mu=0.7, seed=3))
        assert report.n_tomek_removed == 0
        assert report.n_majority_after == 100
        assert report.n_minority_after == 70
        assert report.n_synthetic == 54
        assert int((yr == 1).sum()) == 70 and int((yr == 0).sum()) == 100
        assert Xr.shape == (170, 2)

    def test_no_op_when_ratio_already_met(self, rng):
        X, y = separated_blobs(rng, n_maj=20, n_min=18)
        Xr, yr, report = smote_tomek(X, y, ResamplePlan(target_mu=0.7))
        assert report.ratio_already_met
        assert report.n_synthetic == 0 and report.n_tomek_removed == 0
        assert np.array_equal(Xr, X) and np.array_equal(yr, y)

    def test_registry_scale_counts(self, rng):
        X, y = separated_blobs(rng, n_maj=2141, n_min=336)
        Xr, yr, report = smote_tomek(X, y, ResamplePlan(target_mu=0.7, seed=1))
        assert report.n_tomek_removed == 0
        assert report.n_minority_after == 1499
        assert report.n_synthetic == 1163
        assert report.n_majority_after == 2141

    def test_achieved_ratio_within_rounding(self, rng):
        for _ in range(40):
            n_maj = int(rng.integers(30, 120))
            mu = float(rng.uniform(0.5, 0.9))
            hi = max(7, int(mu * n_maj) - 1)
            n_min = int(rng.integers(6, hi + 1))
            X, y = separated_blobs(rng, n_maj=n_maj, n_min=n_min)
            _, yr, report = smote_tomek(X, y, ResamplePlan(target_mu=mu, seed=2))
            if report.ratio_already_met:
                assert n_min / n_maj >= mu
                continue
            achieved = report.n_minority_after / report.n_majority_after
            assert abs(achieved - mu) <= 1.0 / report.n_majority_after

    def test_link_removed_before_targeting(self, rng):
        # exactly one link: the planted midpoint pair; cleaning shrinks the
        # majority to 99 so the target becomes floor(0.7*99 + 0.5) = 69
        min_cluster = rng.normal(scale=0.3, size=(15, 2))
        maj_cluster = rng.normal(loc=10.0, scale=0.3, size=(99, 2))
        X = np.vstack([min_cluster, [[4.95, 5.0]], maj_cluster, [[5.05, 5.0]]])
        y = np.concatenate([np.ones(16, dtype=np.int8), np.zeros(100, dtype=np.int8)])
        assert len(find_tomek_links(X, y)) == 1
        _, yr, report = smote_tomek(X, y, ResamplePlan(target_mu=0.7, seed=4))
        assert report.n_tomek_removed == 1
        assert report.n_majority_after == 99
        assert report.n_minority_after == 69
        assert report.n_synthetic == 53

    def test_deterministic(self, rng):
        X, y = separated_blobs(rng, n_maj=60, n_min=10)
        plan = ResamplePlan(target_mu=0.6, seed=11)
        Xa, ya, _ = smote_tomek(X, y, plan)
        Xb, yb, _ = smote_tomek(X, y, plan)
        assert np.array_equal(Xa, Xb) and np.array_equal(ya, yb)

    def test_plan_validation(self):
        with pytest.raises(ConfigError):
            ResamplePlan(target_mu=0.0)
        with pytest.raises(ConfigError):
            ResamplePlan(target_mu=1.2)
        with pytest.raises(ConfigError):
            ResamplePlan(smote_k=0)
        with pytest.raises(ConfigError):
            ResamplePlan(tomek_policy="remove_both")

    def test_errors(self, rng):
        with pytest.raises(DataError):
            smote_tomek(rng.normal(size=(10, 2)), np.zeros(10), ResamplePlan())
        # 4 minority rows cannot support the default smote_k of 5
        X, y = separated_blobs(rng, n_maj=40, n_min=4)
        with pytest.raises(DataError):
            smote_tomek(X, y, ResamplePlan(target_mu=0.7))
