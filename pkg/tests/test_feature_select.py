import numpy as np
import pytest

from icdpipe.errors import ConfigError, DataError
from icdpipe.feature_select import (
    FeatureRanking,
    laplacian_score,
    rfe,
    select_top_fraction,
    subset_dataset,
    subset_features,
    tree_importance,
)
from icdpipe.models import make_config

from conftest import make_dataset, make_table


def two_cluster_table(rng, n=50, extra=None):
    half = n // 2
    cluster = np.concatenate([np.zeros(half), np.ones(n - half)])
    x0 = cluster * 4.0 + rng.normal(scale=0.3, size=n)
    x1 = rng.uniform(-2.0, 2.0, size=n)
    cols = [x0, x1]
    if extra is not None:
        cols.append(extra)
    return make_table(np.column_stack(cols)), cluster.astype(np.int8)


class TestLaplacianScore:
    def test_cluster_aligned_feature_scores_lower(self, rng):
        t, _ = two_cluster_table(rng)
        ranking = laplacian_score(t, k_graph=5)
        assert ranking.direction == "lower_is_better"
        assert ranking.scores["x0"] < ranking.scores["x1"]
        assert ranking.order()[0] == "x0"

    def test_duplicated_columns_score_identically(self, rng):
        v = rng.normal(size=30)
        t = make_table(np.column_stack([v, v, rng.normal(size=30)]))
        ranking = laplacian_score(t, k_graph=4)
        assert ranking.scores["x0"] == pytest.approx(ranking.scores["x1"], abs=1e-12)

    def test_constant_column_flagged_and_ranked_last(self, rng):
        t, _ = two_cluster_table(rng, extra=np.full(50, 2.5))
        ranking = laplacian_score(t, k_graph=5)
        assert "x2" in ranking.degenerate
        assert ranking.order()[-1] == "x2"

    def test_scores_keyed_by_parent_feature(self, rng):
        cats = {"c0": np.array(list("ab") * 15, dtype=object)}
        t = make_table(rng.normal(size=(30, 2)), cats=cats)
        ranking = laplacian_score(t, k_graph=4)
        assert set(ranking.scores) == {"x0", "x1", "c0"}

    def test_requires_complete_table(self, rng):
        m = np.zeros(30, dtype=bool)
        m[4] = True
        t = make_table(rng.normal(size=(30, 2)), mask={"x0": m})
        with pytest.raises(DataError):
            laplacian_score(t, k_graph=4)

    def test_requires_enough_rows(self, rng):
        with pytest.raises(DataError):
            laplacian_score(make_table(rng.normal(size=(5, 2))), k_graph=5)

    def test_parent_map_must_cover_columns(self, rng):
        t = make_table(rng.normal(size=(20, 2)))
        with pytest.raises(ConfigError):
            laplacian_score(t, k_graph=3, parent_map={"x0": "x0"})


class TestTreeImportance:
    def test_label_copy_feature_wins(self, rng):
        n = 200
        x0 = (rng.random(n) < 0.5).astype(float)
        X = np.column_stack([x0, rng.normal(size=(n, 3))])
        ds = make_dataset(X, x0.astype(np.int8))
        ranking = tree_importance(ds, make_config("random_forest", seed=2, n_trees=30))
        assert ranking.direction == "higher_is_better"
        assert ranking.order()[0] == "x0"

    def test_scores_sum_to_one(self, rng):
        X = rng.normal(size=(120, 4))
        y = (rng.random(120) < 0.4).astype(np.int8)
        ds = make_dataset(X, y)
        ranking = tree_importance(ds, make_config("random_forest", seed=1, n_trees=20))
        assert sum(ranking.scores.values()) == pytest.approx(1.0, abs=1e-9)
        assert all(v >= 0.0 for v in ranking.scores.values())

    def test_noise_importances_near_uniform(self, rng):
        # fresh data per replicate so the replicates are independent draws
        rows = []
        for seed in range(8):
            X = rng.normal(size=(150, 4))
            y = (rng.random(150) < 0.5).astype(np.int8)
            cfg = make_config("random_forest", seed=seed, n_trees=25)
            ranking = tree_importance(make_dataset(X, y), cfg)
            rows.append([ranking.scores[f"x{j}"] for j in range(4)])
        rows = np.asarray(rows)
        mean = rows.mean(axis=0)
        sd = rows.std(axis=0, ddof=1) / np.sqrt(rows.shape[0])
        assert np.all(np.abs(mean - 0.25) <= 3.0 * np.maximum(sd, 1e-3))

    def test_categorical_children_aggregate_to_parent(self, rng):
        n = 120
        cat = np.array(["p", "q", "r"], dtype=object)[rng.integers(0, 3, n)]
        y = (cat == "p").astype(np.int8)
        ds = make_dataset(rng.normal(size=(n, 2)), y, cats={"c0": cat})
        ranking = tree_importance(ds, make_config("random_forest", seed=3, n_trees=20))
        assert set(ranking.scores) == {"x0", "x1", "c0"}
        assert ranking.order()[0] == "c0"

    def test_single_class_rejected(self, rng):
        ds = make_dataset(rng.normal(size=(20, 2)), np.zeros(20, dtype=np.int8))
        with pytest.raises(DataError):
            tree_importance(ds)


class TestSelectTopFraction:
    @staticmethod
    def ranking(p, direction="higher_is_better"):
        return FeatureRanking(
            method="tree_importance",
            direction=direction,
            scores={f"x{i}": float(i) for i in range(p)},
        )

    def test_floor_of_42_features(self):
        result = select_top_fraction(self.ranking(42), 0.7)
        assert len(result.kept) == 29
        assert result.kept[0] == "x41"

    def test_fraction_one_keeps_all(self):
        result = select_top_fraction(self.ranking(5), 1.0)
        assert len(result.kept) == 5

    def test_minimum_of_one(self):
        result = select_top_fraction(self.ranking(3), 0.1)
        assert len(result.kept) == 1

    def test_tied_scores_keep_schema_order(self):
        r = FeatureRanking(
            method="laplacian",
            direction="lower_is_better",
            scores={"a": 1.0, "b": 1.0, "c": 1.0},
        )
        assert select_top_fraction(r, 0.7).kept == ("a", "b")

    def test_degenerate_ranks_last_despite_score(self):
        r = FeatureRanking(
            method="laplacian",
            direction="lower_is_better",
            scores={"a": 5.0, "b": 0.0},
            degenerate=("b",),
        )
        assert select_top_fraction(r, 0.5).kept == ("a",)

    def test_fraction_bounds(self):
        with pytest.raises(ConfigError):
            select_top_fraction(self.ranking(4), 0.0)
        with pytest.raises(ConfigError):
            select_top_fraction(self.ranking(4), 1.2)


class TestSubset:
    def test_keeps_schema_order(self, rng):
        t = make_table(rng.normal(size=(10, 3)))
        sub = subset_features(t, ["x2", "x0"])
        assert sub.schema.names == ("x0", "x2")
        assert np.array_equal(sub.column("x0"), t.column("x0"))

    def test_empty_subset_rejected(self, rng):
        t = make_table(rng.normal(size=(10, 2)))
        with pytest.raises(ConfigError):
            subset_features(t, ["nope"])

    def test_dataset_subset_preserves_labels(self, rng):
        y = (rng.random(12) < 0.5).astype(np.int8)
        ds = make_dataset(rng.normal(size=(12, 3)), y)
        sub = subset_dataset(ds, ["x1"])
        assert sub.table.schema.names == ("x1",)
        assert np.array_equal(sub.labels, y)


def informative_plus_noise(rng, n=120, n_noise=8, shift=2.0):
    y = np.zeros(n, dtype=np.int8)
    y[n // 2 :] = 1
    informative = rng.normal(size=(n, 2)) + shift * y[:, None]
    noise = rng.normal(size=(n, n_noise))
    return make_dataset(np.column_stack([informative, noise]), y)


class TestRfe:
    def test_informative_features_retained(self, rng):
        ds = informative_plus_noise(rng)
        result = rfe(ds, estimator_kind="logistic_regression", seed=3)
        assert "x0" in result.kept and "x1" in result.kept
        assert result.method == "rfe"

    def test_weak_complementary_features_all_kept(self, rng):
        n = 150
        y = np.zeros(n, dtype=np.int8)
        y[n // 2 :] = 1
        X = rng.normal(size=(n, 3)) + 0.9 * y[:, None]
        ds = make_dataset(X, y)
        result = rfe(ds, estimator_kind="logistic_regression", seed=1)
        assert len(result.kept) == 3

    def test_chosen_subset_beats_or_ties_full_set(self, rng):
        ds = informative_plus_noise(rng, n=100, n_noise=6)
        result = rfe(ds, estimator_kind="logistic_regression", seed=5)
        chosen = max(it["mean_score"] for it in result.iteration_scores)
        assert chosen >= result.iteration_scores[0]["mean_score"]
        best_size = len(result.kept)
        for it in result.iteration_scores:
            if it["n_features"] == best_size:
                assert it["mean_score"] == pytest.approx(chosen)

    def test_iterations_shrink_by_step(self, rng):
        ds = informative_plus_noise(rng, n=90, n_noise=5)
        result = rfe(ds, estimator_kind="logistic_regression", step=2, seed=2)
        sizes = [it["n_features"] for it in result.iteration_scores]
        assert sizes[0] == 7
        assert all(a - b == 2 for a, b in zip(sizes, sizes[1:]))

    def test_deterministic(self, rng):
        ds = informative_plus_noise(rng, n=80, n_noise=4)
        a = rfe(ds, estimator_kind="logistic_regression", seed=7)
        b = rfe(ds, estimator_kind="logistic_regression", seed=7)
        assert a == b

    def test_easy_ensemble_unsupported(self, rng):
        ds = informative_plus_noise(rng, n=60, n_noise=2)
        with pytest.raises(ConfigError):
            rfe(ds, estimator_kind="easy_ensemble")

    def test_config_validation(self, rng):
        ds = informative_plus_noise(rng, n=60, n_noise=2)
        with pytest.raises(ConfigError):
            rfe(ds, step=0)
        with pytest.raises(ConfigError):
            rfe(ds, inner_cv=1)
        with pytest.raises(ConfigError):
            rfe(ds, scoring="roc_auc")

    def test_minority_too_small_for_inner_cv(self, rng):
        y = np.zeros(30, dtype=np.int8)
        y[:2] = 1
        ds = make_dataset(rng.normal(size=(30, 3)), y)
        with pytest.raises(DataError):
            rfe(ds, estimator_kind="logistic_regression", inner_cv=3)
