import numpy as np
import pytest

from icdpipe.dataset import (
    CATEGORICAL,
    NUMERICAL,
    DataTable,
    FeatureSchema,
    FeatureSpec,
    LabeledDataset,
)


def make_schema(n_num=2, n_cat=0, label="y"):
    feats = [FeatureSpec(f"x{i}", NUMERICAL) for i in range(n_num)]
    feats += [FeatureSpec(f"c{i}", CATEGORICAL) for i in range(n_cat)]
    return FeatureSchema(features=tuple(feats), label_column=label, positive_label="1")


def make_table(X, cats=None, mask=None):
    """Build a DataTable from a numeric matrix and optional categorical columns.

    cats: dict name -> object array; mask: dict name -> bool array.
    """
    X = np.asarray(X, dtype=np.float64)
    cats = cats or {}
    schema = FeatureSchema(
        features=tuple(
            [FeatureSpec(f"x{i}", NUMERICAL) for i in range(X.shape[1])]
            + [FeatureSpec(name, CATEGORICAL) for name in cats]
        ),
        label_column="y",
        positive_label="1",
    )
    cols = {f"x{i}": X[:, i].copy() for i in range(X.shape[1])}
    cols.update({name: np.asarray(v, dtype=object) for name, v in cats.items()})
    mask = mask or {}
    full_mask = {
        name: np.asarray(mask.get(name, np.zeros(X.shape[0], dtype=bool)), dtype=bool)
        for name in cols
    }
    return DataTable.build(schema, cols, full_mask)


def make_dataset(X, y, cats=None, mask=None):
    return LabeledDataset(table=make_table(X, cats=cats, mask=mask), labels=np.asarray(y))


def two_blob_data(rng, n_neg=90, n_pos=10, gap=3.0, p=2):
    """Linearly separable-ish blobs; positive blob shifted by gap."""
    X = rng.normal(size=(n_neg + n_pos, p))
    X[n_neg:] += gap
    y = np.zeros(n_neg + n_pos, dtype=np.int8)
    y[n_neg:] = 1
    return X, y


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
