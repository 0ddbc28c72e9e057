"""Schema-driven tabular ingestion, CV splitting and cohort statistics.

The core container is :class:`DataTable`: column-major storage with an
explicit per-cell missing mask, typed by a :class:`FeatureSchema` that fixes
each feature as numerical or categorical.  Labels are binary with class 1 as
the positive (minority) class throughout the package.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np
from scipy import stats as _sstats

from ._rng import rng_for
from .errors import ConfigError, DataError

NUMERICAL = "numerical"
CATEGORICAL = "categorical"


# ---------------------------------------------------------------------------
# schema


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    kind: str
    missing_markers: tuple[str, ...] = ("",)

    def __post_init__(self):
        if self.kind not in (NUMERICAL, CATEGORICAL):
            raise ConfigError(f"feature {self.name!r}: unknown kind {self.kind!r}")


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered feature declarations plus the label contract."""

    features: tuple[FeatureSpec, ...]
    label_column: str
    positive_label: str

    def __post_init__(self):
        names = [f.name for f in self.features]
        if not names:
            raise ConfigError("schema needs at least one feature")
        if len(set(names)) != len(names):
            raise ConfigError("feature names must be unique")
        if self.label_column in names:
            raise ConfigError("label column cannot also be a feature")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features)

    def feature(self, name: str) -> FeatureSpec:
        for f in self.features:
            if f.name == name:
                return f
        raise KeyError(name)

    def kinds(self) -> dict[str, str]:
        return {f.name: f.kind for f in self.features}

    @property
    def numerical_names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features if f.kind == NUMERICAL)

    @property
    def categorical_names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features if f.kind == CATEGORICAL)

    def to_json_dict(self) -> dict:
        return {
            "label_column": self.label_column,
            "positive_label": self.positive_label,
            "features": [
                {
                    "name": f.name,
                    "kind": f.kind,
                    "missing_markers": list(f.missing_markers),
                }
                for f in self.features
            ],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "FeatureSchema":
        try:
            feats = tuple(
                FeatureSpec(
                    name=str(f["name"]),
                    kind=str(f["kind"]),
                    missing_markers=tuple(f.get("missing_markers", [""])),
                )
                for f in d["features"]
            )
            return cls(
                features=feats,
                label_column=str(d["label_column"]),
                positive_label=str(d["positive_label"]),
            )
        except KeyError as exc:
            raise ConfigError(f"schema JSON missing key: {exc}") from exc

    @classmethod
    def from_json_file(cls, path) -> "FeatureSchema":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                return cls.from_json_dict(json.load(fh))
        except OSError as exc:
            raise DataError(f"cannot read schema {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"schema {path} is not valid JSON: {exc}") from exc


def _freeze(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


# ---------------------------------------------------------------------------
# data table


@dataclass(frozen=True)
class DataTable:
    """Column-major table with per-cell missing mask.

    Numerical columns are float64 (missing cells hold NaN); categorical
    columns are object arrays of str (missing cells hold None).  Instances
    are immutable after construction and safe to share across workers.
    """

    schema: FeatureSchema
    columns: dict[str, np.ndarray]
    missing: dict[str, np.ndarray]

    @classmethod
    def build(
        cls,
        schema: FeatureSchema,
        columns: dict[str, Sequence],
        missing: dict[str, Sequence] | None = None,
    ) -> "DataTable":
        cols: dict[str, np.ndarray] = {}
        mask: dict[str, np.ndarray] = {}
        n = None
        for spec in schema.features:
            if spec.name not in columns:
                raise DataError(f"column {spec.name!r} missing from data")
            raw = columns[spec.name]
            if spec.kind == NUMERICAL:
                arr = np.asarray(raw, dtype=np.float64).copy()
            else:
                arr = np.asarray(raw, dtype=object).copy()
            if n is None:
                n = arr.shape[0]
            elif arr.shape[0] != n:
                raise DataError(f"column {spec.name!r} has {arr.shape[0]} rows, expected {n}")
            if missing is not None and spec.name in missing:
                m = np.asarray(missing[spec.name], dtype=bool).copy()
                if m.shape[0] != n:
                    raise DataError(f"mask for {spec.name!r} has wrong length")
            else:
                if spec.kind == NUMERICAL:
                    m = np.isnan(arr)
                else:
                    m = np.array([v is None for v in arr], dtype=bool)
            if spec.kind == NUMERICAL:
                arr[m] = np.nan
            else:
                arr[m] = None
            cols[spec.name] = _freeze(arr)
            mask[spec.name] = _freeze(m)
        return cls(schema=schema, columns=cols, missing=mask)

    @property
    def n_rows(self) -> int:
        first = next(iter(self.columns.values()))
        return int(first.shape[0])

    def column(self, name: str) -> np.ndarray:
        return self.columns[name]

    def mask(self, name: str) -> np.ndarray:
        return self.missing[name]

    @property
    def is_complete(self) -> bool:
        return not any(m.any() for m in self.missing.values())

    @property
    def all_numerical(self) -> bool:
        return all(f.kind == NUMERICAL for f in self.schema.features)

    def numeric_matrix(self) -> np.ndarray:
        """Dense row-major float matrix; requires a complete all-numerical table."""
        if not self.all_numerical:
            raise DataError("table still has categorical columns; encode first")
        if not self.is_complete:
            raise DataError("table has missing cells; impute or encode first")
        return np.column_stack([self.columns[n] for n in self.schema.names])

    def take_rows(self, indices: np.ndarray) -> "DataTable":
        idx = np.asarray(indices)
        cols = {n: c[idx] for n, c in self.columns.items()}
        mask = {n: m[idx] for n, m in self.missing.items()}
        return DataTable.build(self.schema, cols, mask)


@dataclass(frozen=True)
class LabeledDataset:
    """A :class:`DataTable` plus binary labels (1 = positive/minority)."""

    table: DataTable
    labels: np.ndarray
    n_excluded_labels: int = 0

    def __post_init__(self):
        lab = np.asarray(self.labels, dtype=np.int8).copy()
        if lab.shape[0] != self.table.n_rows:
            raise DataError("labels length differs from table rows")
        if lab.size and not np.isin(lab, (0, 1)).all():
            raise DataError("labels must be 0 or 1")
        object.__setattr__(self, "labels", _freeze(lab))

    @property
    def n_rows(self) -> int:
        return self.table.n_rows

    def class_counts(self) -> tuple[int, int]:
        """(n_class0, n_class1)."""
        pos = int(self.labels.sum())
        return self.n_rows - pos, pos

    @property
    def is_single_class(self) -> bool:
        n0, n1 = self.class_counts()
        return n0 == 0 or n1 == 0

    def take_rows(self, indices: np.ndarray) -> "LabeledDataset":
        idx = np.asarray(indices)
        return LabeledDataset(self.table.take_rows(idx), self.labels[idx])


# ---------------------------------------------------------------------------
# loading


def load_csv(path, schema: FeatureSchema) -> LabeledDataset:
    """Load a UTF-8 CSV with header row into a labeled dataset.

    Cells matching a feature's missing markers set the missing mask.  Rows
    whose label cell is empty are excluded; the count is reported on the
    returned dataset as ``n_excluded_labels``.  Extra file columns not in the
    schema are ignored.
    """
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file")
        pos = {name: i for i, name in enumerate(header)}
        for spec in schema.features:
            if spec.name not in pos:
                raise DataError(f"{path}: column {spec.name!r} not in header")
        if schema.label_column not in pos:
            raise DataError(f"{path}: label column {schema.label_column!r} not in header")
        label_i = pos[schema.label_column]

        raw_cols: dict[str, list] = {f.name: [] for f in schema.features}
        raw_mask: dict[str, list] = {f.name: [] for f in schema.features}
        labels: list[int] = []
        n_excluded = 0
        for row_no, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataError(f"{path}:{row_no}: expected {len(header)} cells, got {len(row)}")
            label_cell = row[label_i]
            if label_cell == "":
                n_excluded += 1
                continue
            labels.append(1 if label_cell == schema.positive_label else 0)
            for spec in schema.features:
                cell = row[pos[spec.name]]
                if cell in spec.missing_markers:
                    raw_mask[spec.name].append(True)
                    raw_cols[spec.name].append(np.nan if spec.kind == NUMERICAL else None)
                    continue
                raw_mask[spec.name].append(False)
                if spec.kind == NUMERICAL:
                    try:
                        raw_cols[spec.name].append(float(cell))
                    except ValueError:
                        raise DataError(
                            f"{path}:{row_no}: non-numeric value {cell!r} in numerical "
                            f"column {spec.name!r}"
                        ) from None
                else:
                    raw_cols[spec.name].append(cell)

    table = DataTable.build(schema, raw_cols, raw_mask)
    return LabeledDataset(table, np.array(labels, dtype=np.int8), n_excluded_labels=n_excluded)


def fingerprint(ds: LabeledDataset) -> str:
    """64-bit content hash of the dataset (canonical rendering + schema).

    Invariant under CSV formatting differences that do not change the loaded
    values; used to guard that two experiment results refer to the same data.
    """
    h = hashlib.blake2b(digest_size=8)
    h.update(json.dumps(ds.table.schema.to_json_dict(), sort_keys=True).encode())
    for spec in ds.table.schema.features:
        col = ds.table.column(spec.name)
        mask = ds.table.mask(spec.name)
        h.update(spec.name.encode())
        for v, m in zip(col, mask):
            h.update(b"\x00" if m else (repr(float(v)) if spec.kind == NUMERICAL else str(v)).encode())
            h.update(b"\x1f")
    h.update(ds.labels.tobytes())
    return h.hexdigest()


# ---------------------------------------------------------------------------
# class ratio and CV splitting


def class_ratio(ds: LabeledDataset) -> float:
    """Minority count divided by majority count, in (0, 1]."""
    n0, n1 = ds.class_counts()
    if n0 == 0 or n1 == 0:
        raise DataError("class ratio undefined for single-class data")
    return min(n0, n1) / max(n0, n1)


@dataclass(frozen=True)
class SplitPlan:
    """Fold assignments for repeated stratified k-fold CV."""

    k: int
    repeats: int
    seed: int
    assignments: np.ndarray  # (repeats, n_rows) fold index per row

    def fold_indices(self, repeat: int, fold: int) -> tuple[np.ndarray, np.ndarray]:
        """(train_idx, val_idx) for one fold of one repeat."""
        a = self.assignments[repeat]
        val = np.nonzero(a == fold)[0]
        train = np.nonzero(a != fold)[0]
        return train, val

    def iter_folds(self) -> Iterator[tuple[int, int, np.ndarray, np.ndarray]]:
        for r in range(self.repeats):
            for f in range(self.k):
                tr, va = self.fold_indices(r, f)
                yield r, f, tr, va


def stratified_fold_assignment(labels: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Assign each row a fold in [0, k) with per-class counts balanced to ±1.

    Each class is shuffled and dealt round-robin from a random starting fold,
    so which folds receive the remainder rows varies with the RNG.
    """
    labels = np.asarray(labels)
    out = np.empty(labels.shape[0], dtype=np.int16)
    for cls in np.unique(labels):
        idx = np.nonzero(labels == cls)[0]
        perm = rng.permutation(idx)
        offset = int(rng.integers(k))
        out[perm] = (np.arange(perm.size) + offset) % k
    return out


def make_repeated_stratified_folds(
    ds: LabeledDataset, k: int, repeats: int, seed: int
) -> SplitPlan:
    """Build a deterministic repeated stratified k-fold plan.

    Repeat ``r`` uses the sub-seed ``derive_seed(seed, r)`` (splitmix64
    mixing), so distinct repeats shuffle independently while the whole plan
    is reproducible from ``seed``.
    """
    if k < 2:
        raise ConfigError("k must be >= 2")
    if repeats < 1:
        raise ConfigError("repeats must be >= 1")
    n0, n1 = ds.class_counts()
    if min(n0, n1) < k:
        raise DataError(f"smallest class has {min(n0, n1)} rows; cannot make {k} folds")
    assignments = np.stack(
        [stratified_fold_assignment(ds.labels, k, rng_for(seed, r)) for r in range(repeats)]
    )
    return SplitPlan(k=k, repeats=repeats, seed=seed, assignments=_freeze(assignments))


# ---------------------------------------------------------------------------
# cohort summary


@dataclass(frozen=True)
class FeatureCohortStat:
    """Descriptives and a two-group test for one feature.

    ``groups`` holds per-class stats: for numerical features
    ``{"mean", "sd", "n"}``; for categorical features a mapping
    ``category -> {"count", "percent"}`` where percent is of the group's
    non-missing rows.
    """

    name: str
    kind: str
    groups: dict
    p_value: float | None
    test_name: str
    skipped: bool = False
    skip_reason: str = ""

    def to_json_dict(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "groups": self.groups,
            "p_value": self.p_value,
            "test": self.test_name,
            "skipped": self.skipped,
            "skip_reason": self.skip_reason,
        }


@dataclass(frozen=True)
class CohortReport:
    features: tuple[FeatureCohortStat, ...]
    n_class0: int
    n_class1: int

    def to_json_dict(self) -> dict:
        return {
            "n_class0": self.n_class0,
            "n_class1": self.n_class1,
            "features": [f.to_json_dict() for f in self.features],
        }


_MIN_EXPECTED = 5.0


def _chi2_feature(values0, values1) -> tuple[float | None, bool, str]:
    """Chi-square test of independence on a 2 x C table.

    Categories whose minimum expected count falls below 5 are merged into a
    single bucket before testing.
    """
    cats = sorted(set(values0) | set(values1))
    if len(values0) == 0 or len(values1) == 0:
        return None, True, "a group has no observed values"
    if len(cats) < 2:
        return None, True, "fewer than two categories observed"
    c0 = np.array([sum(v == c for v in values0) for c in cats], dtype=float)
    c1 = np.array([sum(v == c for v in values1) for c in cats], dtype=float)
    total = c0.sum() + c1.sum()
    col = c0 + c1
    expected_min = np.minimum(c0.sum() * col / total, c1.sum() * col / total)
    small = expected_min < _MIN_EXPECTED
    if small.any() and (~small).sum() >= 1:
        c0 = np.append(c0[~small], c0[small].sum())
        c1 = np.append(c1[~small], c1[small].sum())
        keep = (c0 + c1) > 0
        c0, c1 = c0[keep], c1[keep]
    if len(c0) < 2:
        return None, True, "fewer than two categories after merging sparse ones"
    table = np.vstack([c0, c1])
    res = _sstats.chi2_contingency(table, correction=False)
    return float(res.pvalue), False, ""


def _welch_feature(x0: np.ndarray, x1: np.ndarray) -> tuple[float | None, bool, str]:
    if x0.size < 2 or x1.size < 2:
        return None, True, "a group has fewer than two observed values"
    if np.var(x0) == 0.0 and np.var(x1) == 0.0:
        return None, True, "zero variance in both groups"
    res = _sstats.ttest_ind(x0, x1, equal_var=False)
    return float(res.pvalue), False, ""


def cohort_summary(ds: LabeledDataset) -> CohortReport:
    """Per-feature descriptive statistics and two-group tests.

    Numerical features: mean +/- SD per class and a Welch two-sample t-test.
    Categorical features: count (percent) per class and a chi-square test of
    independence.  Missing cells are excluded everywhere; degenerate features
    get a skipped flag instead of a p-value.
    """
    y = ds.labels
    feats: list[FeatureCohortStat] = []
    for spec in ds.table.schema.features:
        col = ds.table.column(spec.name)
        miss = ds.table.mask(spec.name)
        g0 = (y == 0) & ~miss
        g1 = (y == 1) & ~miss
        if spec.kind == NUMERICAL:
            x0 = col[g0].astype(float)
            x1 = col[g1].astype(float)
            groups = {}
            for key, x in (("class0", x0), ("class1", x1)):
                if x.size:
                    sd = float(np.std(x, ddof=1)) if x.size > 1 else 0.0
                    groups[key] = {"mean": float(np.mean(x)), "sd": sd, "n": int(x.size)}
                else:
                    groups[key] = {"mean": None, "sd": None, "n": 0}
            p, skipped, reason = _welch_feature(x0, x1)
            feats.append(
                FeatureCohortStat(spec.name, spec.kind, groups, p, "welch_t", skipped, reason)
            )
        else:
            v0 = list(col[g0])
            v1 = list(col[g1])
            groups = {}
            for key, vals in (("class0", v0), ("class1", v1)):
                counts: dict[str, dict] = {}
                for c in sorted(set(vals)):
                    cnt = sum(v == c for v in vals)
                    pct = 100.0 * cnt / len(vals) if vals else 0.0
                    counts[str(c)] = {"count": int(cnt), "percent": pct}
                groups[key] = counts
            p, skipped, reason = _chi2_feature(v0, v1)
            feats.append(
                FeatureCohortStat(spec.name, spec.kind, groups, p, "chi_square", skipped, reason)
            )
    n0, n1 = ds.class_counts()
    return CohortReport(features=tuple(feats), n_class0=n0, n_class1=n1)
