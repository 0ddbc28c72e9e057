"""Fit-on-train preprocessing transforms.

Every transform is split into a fit step that learns immutable parameters
from a training table and a pure apply step usable on any schema-compatible
table.  Fitted states serialize to JSON so a pipeline can be persisted and
re-applied bit-identically.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import CATEGORICAL, NUMERICAL, DataTable, FeatureSchema, FeatureSpec
from .errors import ConfigError, DataError, UnseenCategoryWarning

MIN_MAX = "min_max"
STANDARD = "standard"
ROBUST = "robust"
SCALER_KINDS = (MIN_MAX, STANDARD, ROBUST)

MVAE_SENTINEL = -1.0


# ---------------------------------------------------------------------------
# scalers


@dataclass(frozen=True)
class FittedScaler:
    """Per-feature scaling parameters for one scaler kind.

    ``params`` maps numerical feature name to its tuple:
    min_max -> (min, max); standard -> (mean, sigma); robust -> (q1, q2, q3).
    Cells equal to ``sentinel`` (when set) are ignored while fitting and pass
    through apply unchanged; this supports keeping encoding sentinels out of
    standardization.
    """

    kind: str
    params: dict[str, tuple[float, ...]]
    sentinel: float | None = None

    def to_json_dict(self) -> dict:
        return {
            "transform": "scaler",
            "kind": self.kind,
            "sentinel": self.sentinel,
            "params": {k: list(v) for k, v in self.params.items()},
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "FittedScaler":
        return cls(
            kind=d["kind"],
            params={k: tuple(v) for k, v in d["params"].items()},
            sentinel=d.get("sentinel"),
        )


def fit_scaler(kind: str, train: DataTable, sentinel: float | None = None) -> FittedScaler:
    """Learn scaling parameters from the non-missing training values."""
    if kind not in SCALER_KINDS:
        raise ConfigError(f"unknown scaler kind {kind!r}")
    params: dict[str, tuple[float, ...]] = {}
    for name in train.schema.numerical_names:
        col = train.column(name)
        obs = col[~train.mask(name)]
        if sentinel is not None:
            obs = obs[obs != sentinel]
        if obs.size == 0 and sentinel is None:
            raise DataError(f"numerical feature {name!r} has no observed training values")
        if obs.size == 0:
            params[name] = _degenerate_params(kind)
            continue
        if kind == MIN_MAX:
            params[name] = (float(obs.min()), float(obs.max()))
        elif kind == STANDARD:
            mu = float(obs.mean())
            sigma = float(obs.std())
            # std of a constant column can come out as roundoff instead of 0
            if sigma <= 1e-12 * max(1.0, abs(mu)):
                sigma = 0.0
            params[name] = (mu, sigma)
        else:
            q1, q2, q3 = np.percentile(obs, [25.0, 50.0, 75.0], method="linear")
            params[name] = (float(q1), float(q2), float(q3))
    return FittedScaler(kind=kind, params=params, sentinel=sentinel)


def _degenerate_params(kind: str) -> tuple[float, ...]:
    if kind == MIN_MAX:
        return (0.0, 0.0)
    if kind == STANDARD:
        return (0.0, 0.0)
    return (0.0, 0.0, 0.0)


def _scale_values(kind: str, p: tuple[float, ...], x: np.ndarray) -> np.ndarray:
    if kind == MIN_MAX:
        lo, hi = p
        if hi == lo:
            return np.zeros_like(x)
        return (x - lo) / (hi - lo)
    if kind == STANDARD:
        mu, sigma = p
        if sigma == 0.0:
            return np.zeros_like(x)
        return (x - mu) / sigma
    q1, q2, q3 = p
    iqr = q3 - q1
    if iqr == 0.0:
        return np.zeros_like(x)
    return (x - q2) / iqr


def apply_scaler(s: FittedScaler, t: DataTable) -> DataTable:
    """Transform numerical cells; missing cells stay missing, categoricals pass."""
    cols: dict[str, np.ndarray] = {}
    mask: dict[str, np.ndarray] = {}
    for spec in t.schema.features:
        col = t.column(spec.name)
        m = t.mask(spec.name)
        if spec.kind == NUMERICAL:
            if spec.name not in s.params:
                raise DataError(f"scaler has no parameters for feature {spec.name!r}")
            out = col.astype(np.float64).copy()
            keep = ~m
            if s.sentinel is not None:
                keep = keep & (col != s.sentinel)
            out[keep] = _scale_values(s.kind, s.params[spec.name], col[keep])
            cols[spec.name] = out
        else:
            cols[spec.name] = col
        mask[spec.name] = m
    return DataTable.build(t.schema, cols, mask)


# ---------------------------------------------------------------------------
# imputation

MEAN = "mean"
MODE = "mode"
KNN = "knn"


def _mode(values: Sequence) -> object:
    """Most frequent value; ties broken by the smaller value."""
    uniq: dict = {}
    for v in values:
        uniq[v] = uniq.get(v, 0) + 1
    return min(uniq, key=lambda v: (-uniq[v], v))


@dataclass(frozen=True)
class FittedImputer:
    """Fill values (mean/mode) or a complete reference table (knn).

    For the knn strategy the distance between a query row and a complete
    reference row is Euclidean over the query's observed numerical dims after
    per-feature min-max scaling, plus a 0/1 mismatch term per observed
    categorical dim; neighbor ties break on reference row index.
    """

    strategy: str
    fill: dict[str, object] | None = None
    k: int | None = None
    reference: DataTable | None = None
    num_ranges: dict[str, tuple[float, float]] | None = None

    def to_json_dict(self) -> dict:
        d: dict = {"transform": "imputer", "strategy": self.strategy}
        if self.strategy in (MEAN, MODE):
            d["fill"] = {k: v for k, v in self.fill.items()}
        else:
            d["k"] = self.k
            d["num_ranges"] = {k: list(v) for k, v in self.num_ranges.items()}
            d["reference"] = {
                name: list(self.reference.column(name)) for name in self.reference.schema.names
            }
        return d

    @classmethod
    def from_json_dict(cls, d: dict, schema: FeatureSchema | None = None) -> "FittedImputer":
        if d["strategy"] in (MEAN, MODE):
            return cls(strategy=d["strategy"], fill=dict(d["fill"]))
        if schema is None:
            raise ConfigError("knn imputer deserialization needs the feature schema")
        cols = {name: np.asarray(vals, dtype=object) for name, vals in d["reference"].items()}
        reference = DataTable.build(schema, cols)
        return cls(
            strategy=KNN,
            k=int(d["k"]),
            reference=reference,
            num_ranges={k: tuple(v) for k, v in d["num_ranges"].items()},
        )


def fit_impute(strategy: str, train: DataTable, k: int = 5) -> FittedImputer:
    if strategy in (MEAN, MODE):
        fill: dict[str, object] = {}
        for spec in train.schema.features:
            obs_mask = ~train.mask(spec.name)
            obs = train.column(spec.name)[obs_mask]
            if obs.size == 0:
                raise DataError(f"feature {spec.name!r} has no observed training values")
            if spec.kind == NUMERICAL:
                if strategy == MEAN:
                    fill[spec.name] = float(obs.mean())
                else:
                    fill[spec.name] = float(_mode([float(v) for v in obs]))
            else:
                fill[spec.name] = _mode(list(obs))
        return FittedImputer(strategy=strategy, fill=fill)
    if strategy != KNN:
        raise ConfigError(f"unknown imputation strategy {strategy!r}")
    if k < 1:
        raise ConfigError("knn imputation needs k >= 1")
    complete = np.ones(train.n_rows, dtype=bool)
    for name in train.schema.names:
        complete &= ~train.mask(name)
    if int(complete.sum()) < k:
        raise DataError(f"knn imputation needs >= {k} complete training rows, found {int(complete.sum())}")
    ranges: dict[str, tuple[float, float]] = {}
    for name in train.schema.numerical_names:
        obs = train.column(name)[~train.mask(name)]
        if obs.size == 0:
            raise DataError(f"numerical feature {name!r} has no observed training values")
        ranges[name] = (float(obs.min()), float(obs.max()))
    reference = train.take_rows(np.nonzero(complete)[0])
    return FittedImputer(strategy=KNN, k=k, reference=reference, num_ranges=ranges)


def _knn_fill_row(imp: FittedImputer, t: DataTable, row: int) -> dict[str, object]:
    ref = imp.reference
    n_ref = ref.n_rows
    d2 = np.zeros(n_ref)
    for spec in t.schema.features:
        if t.mask(spec.name)[row]:
            continue
        v = t.column(spec.name)[row]
        rcol = ref.column(spec.name)
        if spec.kind == NUMERICAL:
            lo, hi = imp.num_ranges[spec.name]
            if hi == lo:
                continue
            d2 += ((rcol.astype(float) - float(v)) / (hi - lo)) ** 2
        else:
            d2 += (rcol != v).astype(float)
    order = np.lexsort((np.arange(n_ref), np.sqrt(d2)))
    nn = order[: imp.k]
    fills: dict[str, object] = {}
    for spec in t.schema.features:
        if not t.mask(spec.name)[row]:
            continue
        vals = ref.column(spec.name)[nn]
        if spec.kind == NUMERICAL:
            fills[spec.name] = float(np.mean(vals.astype(float)))
        else:
            fills[spec.name] = _mode(list(vals))
    return fills


def apply_impute(imp: FittedImputer, t: DataTable) -> DataTable:
    """Return a complete table with every missing cell filled."""
    cols = {name: t.column(name).copy() for name in t.schema.names}
    if imp.strategy in (MEAN, MODE):
        for spec in t.schema.features:
            m = t.mask(spec.name)
            if m.any():
                cols[spec.name][m] = imp.fill[spec.name]
    else:
        incomplete = np.zeros(t.n_rows, dtype=bool)
        for name in t.schema.names:
            incomplete |= t.mask(name)
        for row in np.nonzero(incomplete)[0]:
            for name, value in _knn_fill_row(imp, t, int(row)).items():
                cols[name][row] = value
    empty = {name: np.zeros(t.n_rows, dtype=bool) for name in t.schema.names}
    return DataTable.build(t.schema, cols, empty)


# ---------------------------------------------------------------------------
# missing-value-aware encoding


@dataclass(frozen=True)
class MvaeState:
    """Training extrema per numerical feature and vocabulary plus reserved
    missing-entity token per categorical feature.

    Applied numerical values land in [0, 1] for observed cells (out-of-range
    apply-time values are clamped first) and exactly -1 for missing cells, so
    the sentinel is unambiguous.  Missing categorical cells become the
    reserved token, which is guaranteed distinct from every observed
    category.
    """

    num_ranges: dict[str, tuple[float, float]]
    cat_vocab: dict[str, tuple[str, ...]]
    missing_tokens: dict[str, str]

    def to_json_dict(self) -> dict:
        return {
            "transform": "mvae",
            "num_ranges": {k: list(v) for k, v in self.num_ranges.items()},
            "cat_vocab": {k: list(v) for k, v in self.cat_vocab.items()},
            "missing_tokens": dict(self.missing_tokens),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "MvaeState":
        return cls(
            num_ranges={k: tuple(v) for k, v in d["num_ranges"].items()},
            cat_vocab={k: tuple(v) for k, v in d["cat_vocab"].items()},
            missing_tokens=dict(d["missing_tokens"]),
        )


def fit_mvae(train: DataTable) -> MvaeState:
    num_ranges: dict[str, tuple[float, float]] = {}
    for name in train.schema.numerical_names:
        obs = train.column(name)[~train.mask(name)]
        if obs.size == 0:
            raise DataError(f"numerical feature {name!r} has no observed training values")
        num_ranges[name] = (float(obs.min()), float(obs.max()))
    cat_vocab: dict[str, tuple[str, ...]] = {}
    tokens: dict[str, str] = {}
    for name in train.schema.categorical_names:
        obs = train.column(name)[~train.mask(name)]
        vocab = tuple(sorted({str(v) for v in obs}))
        token = "<MISSING>"
        while token in vocab:
            token = "<" + token + ">"
        cat_vocab[name] = vocab
        tokens[name] = token
    return MvaeState(num_ranges=num_ranges, cat_vocab=cat_vocab, missing_tokens=tokens)


def apply_mvae(state: MvaeState, t: DataTable) -> DataTable:
    """Encode missingness as data; the output has an empty missing mask."""
    cols: dict[str, np.ndarray] = {}
    for spec in t.schema.features:
        col = t.column(spec.name)
        m = t.mask(spec.name)
        if spec.kind == NUMERICAL:
            lo, hi = state.num_ranges[spec.name]
            out = np.full(t.n_rows, MVAE_SENTINEL, dtype=np.float64)
            obs = ~m
            if hi == lo:
                out[obs] = 0.0
            else:
                out[obs] = np.clip((col[obs] - lo) / (hi - lo), 0.0, 1.0)
            cols[spec.name] = out
        else:
            out = col.copy()
            out[m] = state.missing_tokens[spec.name]
            cols[spec.name] = out
    empty = {name: np.zeros(t.n_rows, dtype=bool) for name in t.schema.names}
    return DataTable.build(t.schema, cols, empty)


# ---------------------------------------------------------------------------
# one-hot encoding


@dataclass(frozen=True)
class OneHotMap:
    """Lexicographic category layout for expanding categoricals to binaries.

    The encoded table keeps numerical features in place and replaces each
    categorical feature with one 0/1 column per training-time category,
    named ``feature=category``.  A category unseen at apply time yields all
    zeros for that feature's columns and an :class:`UnseenCategoryWarning`.
    """

    vocab: dict[str, tuple[str, ...]]
    source_names: tuple[str, ...]
    source_kinds: dict[str, str]

    def output_schema(self) -> FeatureSchema:
        feats = []
        for name in self.source_names:
            if self.source_kinds[name] == NUMERICAL:
                feats.append(FeatureSpec(name, NUMERICAL))
            else:
                for cat in self.vocab[name]:
                    feats.append(FeatureSpec(f"{name}={cat}", NUMERICAL))
        # label metadata is irrelevant for encoded feature tables; reuse a
        # placeholder distinct from any feature name
        label = "__label__"
        while any(f.name == label for f in feats):
            label = "_" + label
        return FeatureSchema(features=tuple(feats), label_column=label, positive_label="1")

    def parents(self) -> dict[str, str]:
        """Encoded column name -> source feature name."""
        out: dict[str, str] = {}
        for name in self.source_names:
            if self.source_kinds[name] == NUMERICAL:
                out[name] = name
            else:
                for cat in self.vocab[name]:
                    out[f"{name}={cat}"] = name
        return out

    def to_json_dict(self) -> dict:
        return {
            "transform": "one_hot",
            "vocab": {k: list(v) for k, v in self.vocab.items()},
            "source_names": list(self.source_names),
            "source_kinds": dict(self.source_kinds),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "OneHotMap":
        return cls(
            vocab={k: tuple(v) for k, v in d["vocab"].items()},
            source_names=tuple(d["source_names"]),
            source_kinds=dict(d["source_kinds"]),
        )


def fit_one_hot(train: DataTable) -> OneHotMap:
    vocab: dict[str, tuple[str, ...]] = {}
    for name in train.schema.categorical_names:
        obs = train.column(name)[~train.mask(name)]
        vocab[name] = tuple(sorted({str(v) for v in obs}))
    return OneHotMap(
        vocab=vocab,
        source_names=train.schema.names,
        source_kinds=train.schema.kinds(),
    )


def apply_one_hot(omap: OneHotMap, t: DataTable) -> DataTable:
    out_schema = omap.output_schema()
    cols: dict[str, np.ndarray] = {}
    mask: dict[str, np.ndarray] = {}
    for name in omap.source_names:
        if omap.source_kinds[name] == NUMERICAL:
            cols[name] = t.column(name)
            mask[name] = t.mask(name)
            continue
        col = t.column(name)
        m = t.mask(name)
        vocab = omap.vocab[name]
        index = {c: i for i, c in enumerate(vocab)}
        block = np.zeros((t.n_rows, len(vocab)), dtype=np.float64)
        unseen: set[str] = set()
        for row in range(t.n_rows):
            if m[row]:
                continue  # missing without a prior encoding stage: all zeros
            j = index.get(str(col[row]))
            if j is None:
                unseen.add(str(col[row]))
            else:
                block[row, j] = 1.0
        if unseen:
            warnings.warn(
                f"feature {name!r}: categories {sorted(unseen)} not in training "
                "vocabulary; encoded as all zeros",
                UnseenCategoryWarning,
                stacklevel=2,
            )
        for i, cat in enumerate(vocab):
            key = f"{name}={cat}"
            cols[key] = block[:, i]
            mask[key] = np.zeros(t.n_rows, dtype=bool)
    return DataTable.build(out_schema, cols, mask)
