"""Built-in synthetic imbalanced dataset for end-to-end checks.

Shape: 10 numerical features (2 informative Gaussians, 8 noise), 3
categorical features (1 informative), a 13% positive class, and
value-dependent (not-at-random) missingness injected into the two
informative numerical columns at a 20% cell rate.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from ._rng import rng_for
from .dataset import (
    CATEGORICAL,
    NUMERICAL,
    DataTable,
    FeatureSchema,
    FeatureSpec,
    LabeledDataset,
)

DEFAULT_N = 2000
DEFAULT_SEED = 417
POSITIVE_FRACTION = 0.13
MISSING_FRACTION = 0.20

_NUM_INFORMATIVE = ("num_1", "num_2")
_CLASS_SHIFT = {"num_1": 1.30, "num_2": 1.00}
_CAT_LEVELS = {
    "cat_1": ("low", "mid", "high"),
    "cat_2": ("u", "v", "w"),
    "cat_3": ("x", "y"),
}
_CAT1_P_NEG = (0.55, 0.30, 0.15)
_CAT1_P_POS = (0.15, 0.33, 0.52)


def synthetic_schema() -> FeatureSchema:
    feats = [FeatureSpec(f"num_{i}", NUMERICAL) for i in range(1, 11)]
    feats += [FeatureSpec(name, CATEGORICAL) for name in _CAT_LEVELS]
    return FeatureSchema(features=tuple(feats), label_column="outcome", positive_label="1")


def _nmar_missing_rows(values: np.ndarray, n_missing: int, rng: np.random.Generator) -> np.ndarray:
    """Pick rows to blank with probability increasing in the value itself."""
    z = (values - np.median(values)) / (values.std() + 1e-12)
    w = 1.0 / (1.0 + np.exp(-2.0 * z)) + 1e-6
    # weighted sampling without replacement via exponential race
    keys = rng.exponential(1.0, size=values.size) / w
    return np.argsort(keys, kind="stable")[:n_missing]


def make_synthetic(n: int = DEFAULT_N, seed: int = DEFAULT_SEED) -> LabeledDataset:
    if n < 50:
        raise ValueError("synthetic dataset needs n >= 50")
    schema = synthetic_schema()
    n_pos = int(round(POSITIVE_FRACTION * n))
    labels = np.zeros(n, dtype=np.int8)
    labels[rng_for(seed, 0).permutation(n)[:n_pos]] = 1

    cols: dict[str, np.ndarray] = {}
    mask: dict[str, np.ndarray] = {}
    for i in range(1, 11):
        name = f"num_{i}"
        x = rng_for(seed, i).normal(0.0, 1.0, n)
        if name in _CLASS_SHIFT:
            x = x + _CLASS_SHIFT[name] * labels
        cols[name] = x
        mask[name] = np.zeros(n, dtype=bool)

    rng = rng_for(seed, 20)
    levels = np.asarray(_CAT_LEVELS["cat_1"], dtype=object)
    draws = np.empty(n, dtype=object)
    u = rng.random(n)
    for i in range(n):
        p = _CAT1_P_POS if labels[i] == 1 else _CAT1_P_NEG
        draws[i] = levels[int(np.searchsorted(np.cumsum(p), u[i]))]
    cols["cat_1"] = draws
    mask["cat_1"] = np.zeros(n, dtype=bool)
    for j, name in enumerate(("cat_2", "cat_3")):
        rng = rng_for(seed, 21 + j)
        lv = np.asarray(_CAT_LEVELS[name], dtype=object)
        cols[name] = lv[rng.integers(0, len(lv), n)]
        mask[name] = np.zeros(n, dtype=bool)

    n_missing = int(round(MISSING_FRACTION * n))
    for j, name in enumerate(_NUM_INFORMATIVE):
        rows = _nmar_missing_rows(cols[name], n_missing, rng_for(seed, 30 + j))
        m = np.zeros(n, dtype=bool)
        m[rows] = True
        mask[name] = m

    table = DataTable.build(schema, cols, mask)
    return LabeledDataset(table=table, labels=labels)


def write_synthetic_csv(
    out_path: str | Path,
    schema_path: str | Path | None = None,
    n: int = DEFAULT_N,
    seed: int = DEFAULT_SEED,
) -> tuple[Path, Path]:
    """Write the dataset as CSV (missing cells empty) plus its schema JSON."""
    out_path = Path(out_path)
    if schema_path is None:
        schema_path = out_path.with_suffix(".schema.json")
    schema_path = Path(schema_path)
    ds = make_synthetic(n=n, seed=seed)
    schema = ds.table.schema
    with out_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(schema.names) + [schema.label_column])
        for i in range(ds.table.n_rows):
            row = []
            for name in schema.names:
                if ds.table.mask(name)[i]:
                    row.append("")
                elif schema.feature(name).kind == NUMERICAL:
                    row.append(repr(float(ds.table.column(name)[i])))
                else:
                    row.append(str(ds.table.column(name)[i]))
            row.append("1" if ds.labels[i] == 1 else "0")
            writer.writerow(row)
    schema_path.write_text(json.dumps(schema.to_json_dict(), indent=2, sort_keys=True) + "\n")
    return out_path, schema_path
