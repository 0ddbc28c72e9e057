"""Pipeline composition, repeated-CV experiments, persistence, comparison.

A pipeline is an ordered stage list plus a model list and a CV plan.  Per
fold, every stage is fitted on the training partition only: encode/scale/
select states are applied to both partitions, outlier removal and
resampling touch the training partition alone.  Runs are deterministic
functions of (dataset, config, seed).
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ._rng import derive_seed
from .conditioning import LofConfig, ResamplePlan, remove_outliers, smote_tomek
from .dataset import (
    DataTable,
    FeatureSchema,
    FeatureSpec,
    LabeledDataset,
    NUMERICAL,
    fingerprint,
    make_repeated_stratified_folds,
)
from .errors import ConfigError, DataError
from .feature_select import (
    laplacian_score,
    rfe,
    select_top_fraction,
    subset_features,
    tree_importance,
)
from .metrics import confusion, metric_suite, optimal_threshold, paired_test, roc_auc, roc_curve
from .models import (
    BOOSTED_TREES,
    EASY_ENSEMBLE,
    MODEL_KINDS,
    RANDOM_FOREST,
    ModelConfig,
    make_config,
    model_to_json_dict,
    predict,
    score,
    train,
)
from .transforms import (
    MVAE_SENTINEL,
    apply_impute,
    apply_mvae,
    apply_one_hot,
    apply_scaler,
    fit_impute,
    fit_mvae,
    fit_one_hot,
    fit_scaler,
)

SET_IDS = ("SET1", "SET2", "SET3", "SET4")
TREE_MODEL_KINDS = (RANDOM_FOREST, BOOSTED_TREES, EASY_ENSEMBLE)

# seed stream tags so per-fold consumers never collide
_STREAM_SELECT = 1
_STREAM_RESAMPLE = 2
_STREAM_MODEL = 3


# ---------------------------------------------------------------------------
# stage specs


@dataclass(frozen=True)
class MvaeStage:
    name = "mvae"

    def to_json_dict(self) -> dict:
        return {"stage": self.name}


@dataclass(frozen=True)
class ImputeStage:
    strategy: str = "mean"
    knn_k: int = 5
    name = "impute"

    def to_json_dict(self) -> dict:
        return {"stage": self.name, "strategy": self.strategy, "knn_k": self.knn_k}


@dataclass(frozen=True)
class OneHotStage:
    name = "one_hot"

    def to_json_dict(self) -> dict:
        return {"stage": self.name}


@dataclass(frozen=True)
class ScaleStage:
    kind: str = "standard"
    exempt_sentinels: bool = False
    name = "scale"

    def to_json_dict(self) -> dict:
        return {
            "stage": self.name,
            "kind": self.kind,
            "exempt_sentinels": self.exempt_sentinels,
        }


@dataclass(frozen=True)
class SelectStage:
    method: str = "rfe"  # rfe | laplacian | tree_importance
    fraction: float = 0.7  # filter methods keep this fraction
    step: int = 1
    inner_cv: int = 3
    estimator_kind: str = "random_forest"
    estimator_params: dict | None = None
    k_graph: int = 5
    freeze_global: bool = False
    name = "select"

    def to_json_dict(self) -> dict:
        return {
            "stage": self.name,
            "method": self.method,
            "fraction": self.fraction,
            "step": self.step,
            "inner_cv": self.inner_cv,
            "estimator_kind": self.estimator_kind,
            "estimator_params": self.estimator_params,
            "k_graph": self.k_graph,
            "freeze_global": self.freeze_global,
        }


@dataclass(frozen=True)
class LofStage:
    n_neighbors: int = 2
    score_threshold: float = 1.5
    name = "lof_remove"

    def to_json_dict(self) -> dict:
        return {
            "stage": self.name,
            "n_neighbors": self.n_neighbors,
            "score_threshold": self.score_threshold,
        }


@dataclass(frozen=True)
class ResampleStage:
    mu: float = 0.7
    smote_k: int = 5
    smote_first: bool = False
    name = "smote_tomek"

    def to_json_dict(self) -> dict:
        return {
            "stage": self.name,
            "mu": self.mu,
            "smote_k": self.smote_k,
            "smote_first": self.smote_first,
        }


PipelineStage = (
    MvaeStage | ImputeStage | OneHotStage | ScaleStage | SelectStage | LofStage | ResampleStage
)

_ENCODE_STAGES = (MvaeStage, ImputeStage, OneHotStage, ScaleStage)
_CONDITION_STAGES = (SelectStage, LofStage, ResampleStage)


def stage_from_json_dict(d: dict) -> PipelineStage:
    kind = d.get("stage")
    rest = {k: v for k, v in d.items() if k != "stage"}
    for cls in (MvaeStage, ImputeStage, OneHotStage, ScaleStage, SelectStage, LofStage, ResampleStage):
        if kind == cls.name:
            try:
                return cls(**rest)
            except TypeError as exc:
                raise ConfigError(f"bad options for stage {kind!r}: {exc}") from None
    raise ConfigError(f"unknown pipeline stage {kind!r}")


@dataclass(frozen=True)
class PipelineConfig:
    stages: tuple
    models: tuple[ModelConfig, ...]
    k: int = 10
    repeats: int = 3
    seed: int = 0
    label: str = "custom"

    def to_json_dict(self) -> dict:
        return {
            "label": self.label,
            "stages": [s.to_json_dict() for s in self.stages],
            "models": [m.to_json_dict() for m in self.models],
            "k": self.k,
            "repeats": self.repeats,
            "seed": self.seed,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "PipelineConfig":
        return cls(
            stages=tuple(stage_from_json_dict(s) for s in d.get("stages", [])),
            models=tuple(ModelConfig.from_json_dict(m) for m in d.get("models", [])),
            k=int(d.get("k", 10)),
            repeats=int(d.get("repeats", 3)),
            seed=int(d.get("seed", 0)),
            label=str(d.get("label", "custom")),
        )


def validate_pipeline(config: PipelineConfig) -> None:
    if not config.models:
        raise ConfigError("pipeline needs at least one model")
    if config.k < 2 or config.repeats < 1:
        raise ConfigError("pipeline needs k >= 2 and repeats >= 1")
    seen: set[str] = set()
    for stage in config.stages:
        if not isinstance(stage, _ENCODE_STAGES + _CONDITION_STAGES):
            raise ConfigError(f"unknown stage object {stage!r}")
        if stage.name in seen:
            raise ConfigError(f"stage {stage.name!r} appears more than once")
        seen.add(stage.name)
    # conditioning needs the finished encoded space: no encode stage may follow
    saw_condition = False
    for stage in config.stages:
        if isinstance(stage, _CONDITION_STAGES):
            saw_condition = True
        elif saw_condition:
            raise ConfigError(
                f"encode stage {stage.name!r} cannot follow selection/conditioning stages"
            )
    completeness = [i for i, s in enumerate(config.stages) if isinstance(s, (MvaeStage, ImputeStage))]
    condition = [i for i, s in enumerate(config.stages) if isinstance(s, _CONDITION_STAGES)]
    if condition and completeness and min(condition) < min(completeness):
        raise ConfigError(
            "stages requiring complete data must come after the mvae/impute stage"
        )
    for m in config.models:
        if m.kind not in MODEL_KINDS:
            raise ConfigError(f"unknown model kind {m.kind!r}")


def default_models(kinds=MODEL_KINDS) -> tuple[ModelConfig, ...]:
    return tuple(make_config(kind) for kind in kinds)


def build_set(
    set_id: str,
    models: tuple[ModelConfig, ...] | None = None,
    k: int = 10,
    repeats: int = 3,
    seed: int = 0,
) -> PipelineConfig:
    """The four standard stage compositions."""
    if set_id not in SET_IDS:
        raise ConfigError(f"unknown set id {set_id!r}; expected one of {SET_IDS}")
    base = (MvaeStage(), OneHotStage(), ScaleStage(kind="standard"))
    if set_id == "SET1":
        stages = base
    elif set_id == "SET2":
        stages = base + (SelectStage(method="rfe"), LofStage(n_neighbors=2))
    elif set_id == "SET3":
        stages = base + (
            SelectStage(method="rfe"),
            LofStage(n_neighbors=2),
            ResampleStage(mu=0.7),
        )
    else:  # SET4 keeps every outlier
        stages = base + (SelectStage(method="rfe"), ResampleStage(mu=0.7))
    return PipelineConfig(
        stages=stages,
        models=default_models() if models is None else tuple(models),
        k=k,
        repeats=repeats,
        seed=seed,
        label=set_id,
    )


# ---------------------------------------------------------------------------
# per-fold execution


def _model_names(models: tuple[ModelConfig, ...]) -> list[str]:
    names = []
    for m in models:
        base = m.kind
        name = base
        suffix = 2
        while name in names:
            name = f"{base}#{suffix}"
            suffix += 1
        names.append(name)
    return names


def _run_selection(
    stage: SelectStage,
    tr_t: DataTable,
    y_tr: np.ndarray,
    parent_map: dict[str, str],
    seed: int,
) -> tuple[tuple[str, ...], dict]:
    lds = LabeledDataset(table=tr_t, labels=y_tr)
    if stage.method == "rfe":
        res = rfe(
            lds,
            estimator_kind=stage.estimator_kind,
            step=stage.step,
            inner_cv=stage.inner_cv,
            scoring="f1",
            seed=seed,
            estimator_params=stage.estimator_params,
            parent_map=parent_map,
        )
        return res.kept, res.to_json_dict()
    if stage.method == "laplacian":
        ranking = laplacian_score(tr_t, k_graph=stage.k_graph, parent_map=parent_map)
    elif stage.method == "tree_importance":
        cfg = make_config(
            stage.estimator_kind, seed=seed, **(stage.estimator_params or {})
        )
        ranking = tree_importance(lds, cfg, parent_map=parent_map)
    else:
        raise ConfigError(f"unknown selection method {stage.method!r}")
    res = select_top_fraction(ranking, stage.fraction)
    return res.kept, res.to_json_dict()


def _fit_fold(
    ds: LabeledDataset,
    config: PipelineConfig,
    r: int,
    f: int,
    tr_idx: np.ndarray,
    va_idx: np.ndarray,
    frozen_selection: tuple[str, ...] | None,
    capture_state: bool = False,
) -> tuple[list[dict], dict, list]:
    tr = ds.take_rows(tr_idx)
    va = ds.take_rows(va_idx)
    tr_t, va_t = tr.table, va.table
    y_tr = np.asarray(tr.labels).copy()
    y_va = np.asarray(va.labels)
    parent_map: dict[str, str] | None = None
    X_tr = X_va = None
    info: dict = {"repeat": r, "fold": f}
    states: list = []

    def matrices():
        nonlocal X_tr, X_va
        if X_tr is None:
            X_tr = tr_t.numeric_matrix()
            X_va = va_t.numeric_matrix()
        return X_tr, X_va

    try:
        for stage in config.stages:
            if isinstance(stage, MvaeStage):
                st = fit_mvae(tr_t)
                tr_t = apply_mvae(st, tr_t)
                va_t = apply_mvae(st, va_t)
                if capture_state:
                    states.append(st.to_json_dict())
            elif isinstance(stage, ImputeStage):
                st = fit_impute(stage.strategy, tr_t, k=stage.knn_k)
                tr_t = apply_impute(st, tr_t)
                va_t = apply_impute(st, va_t)
                if capture_state:
                    states.append(st.to_json_dict())
            elif isinstance(stage, OneHotStage):
                omap = fit_one_hot(tr_t)
                tr_t = apply_one_hot(omap, tr_t)
                va_t = apply_one_hot(omap, va_t)
                parent_map = omap.parents()
                if capture_state:
                    states.append(omap.to_json_dict())
            elif isinstance(stage, ScaleStage):
                sc = fit_scaler(
                    stage.kind,
                    tr_t,
                    sentinel=MVAE_SENTINEL if stage.exempt_sentinels else None,
                )
                tr_t = apply_scaler(sc, tr_t)
                va_t = apply_scaler(sc, va_t)
                if capture_state:
                    states.append(sc.to_json_dict())
            elif isinstance(stage, SelectStage):
                pm = parent_map or {n: n for n in tr_t.schema.names}
                if frozen_selection is not None:
                    kept = frozen_selection
                    info["selected"] = list(kept)
                else:
                    kept, sel_json = _run_selection(
                        stage, tr_t, y_tr, pm, derive_seed(config.seed, _STREAM_SELECT, r, f)
                    )
                    info["selected"] = list(kept)
                    if capture_state:
                        states.append(sel_json)
                wanted = set(kept)
                keep_cols = [c for c in tr_t.schema.names if pm[c] in wanted]
                tr_t = subset_features(tr_t, keep_cols)
                va_t = subset_features(va_t, keep_cols)
                parent_map = {c: pm[c] for c in keep_cols}
            elif isinstance(stage, LofStage):
                Xt, _ = matrices()
                cfg = LofConfig(stage.n_neighbors, stage.score_threshold)
                Xt, y_tr, removed = remove_outliers(Xt, y_tr, cfg)
                X_tr = Xt
                info["lof_removed"] = [int(i) for i in removed]
            elif isinstance(stage, ResampleStage):
                Xt, _ = matrices()
                plan = ResamplePlan(
                    target_mu=stage.mu,
                    smote_k=stage.smote_k,
                    seed=derive_seed(config.seed, _STREAM_RESAMPLE, r, f),
                    smote_first=stage.smote_first,
                )
                Xt, y_tr, report = smote_tomek(Xt, y_tr, plan)
                X_tr = Xt
                info["resample"] = report.to_json_dict()
        X_tr, X_va = matrices()
    except DataError as exc:
        raise DataError(f"fold (repeat={r}, fold={f}): {exc}") from exc

    records: list[dict] = []
    names = _model_names(config.models)
    single_class_val = bool((y_va == y_va[0]).all())
    for mi, (mname, mcfg) in enumerate(zip(names, config.models)):
        cfg = replace(mcfg, seed=derive_seed(config.seed, _STREAM_MODEL, r, f, mi))
        try:
            model = train(cfg, X_tr, y_tr)
        except DataError as exc:
            raise DataError(f"fold (repeat={r}, fold={f}), model {mname}: {exc}") from exc
        scores = score(model, X_va)
        preds = predict(model, X_va)
        c = confusion(y_va, preds)
        rep = metric_suite(c)
        # decisions stay at 0.5; the youden point is exported as auxiliary data
        if single_class_val:
            rep = rep.with_auc(0.0, flagged=True)
            youden = None
        else:
            rep = rep.with_auc(roc_auc(y_va, scores))
            youden = float(optimal_threshold(roc_curve(y_va, scores)))
            if not np.isfinite(youden):
                youden = None
        records.append(
            {
                "model": mname,
                "repeat": r,
                "fold": f,
                "metrics": {k: v * 100.0 for k, v in rep.values().items()},
                "counts": {
                    "n_train": int(X_tr.shape[0]),
                    "n_validation": int(X_va.shape[0]),
                    "tp": c.tp,
                    "fp": c.fp,
                    "tn": c.tn,
                    "fn": c.fn,
                },
                "flags": list(rep.degenerate),
                "youden_threshold": youden,
            }
        )
        if capture_state:
            states.append(model_to_json_dict(model))
    return records, info, states


def _fold_worker(args) -> tuple[int, int, list[dict], dict]:
    ds, config, r, f, tr_idx, va_idx, frozen = args
    records, info, _ = _fit_fold(ds, config, r, f, tr_idx, va_idx, frozen)
    return r, f, records, info


def fold_fitted_state(
    ds: LabeledDataset, config: PipelineConfig, repeat: int = 0, fold: int = 0
) -> list:
    """Serialized fitted stage states and models for one fold.

    Exists so tests can assert that validation-side perturbations leave
    training-time state untouched.
    """
    validate_pipeline(config)
    plan = make_repeated_stratified_folds(ds, config.k, config.repeats, config.seed)
    tr_idx, va_idx = plan.fold_indices(repeat, fold)
    frozen = _frozen_selection(ds, config)
    _, _, states = _fit_fold(
        ds, config, repeat, fold, tr_idx, va_idx, frozen, capture_state=True
    )
    return states


# ---------------------------------------------------------------------------
# experiment runner


@dataclass(frozen=True)
class ExperimentResult:
    manifest: dict
    folds: tuple[dict, ...]
    aggregates: dict

    def to_json_dict(self) -> dict:
        return {
            "manifest": self.manifest,
            "folds": list(self.folds),
            "aggregates": self.aggregates,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "ExperimentResult":
        return cls(
            manifest=d["manifest"], folds=tuple(d["folds"]), aggregates=d["aggregates"]
        )


def _frozen_selection(
    ds: LabeledDataset, config: PipelineConfig
) -> tuple[str, ...] | None:
    """Whole-dataset selection when a select stage asks to freeze globally."""
    sel = [s for s in config.stages if isinstance(s, SelectStage)]
    if not sel or not sel[0].freeze_global:
        return None
    stage = sel[0]
    t = ds.table
    parent_map: dict[str, str] | None = None
    for st in config.stages:
        if st is stage:
            break
        if isinstance(st, MvaeStage):
            t = apply_mvae(fit_mvae(t), t)
        elif isinstance(st, ImputeStage):
            t = apply_impute(fit_impute(st.strategy, t, k=st.knn_k), t)
        elif isinstance(st, OneHotStage):
            omap = fit_one_hot(t)
            t = apply_one_hot(omap, t)
            parent_map = omap.parents()
        elif isinstance(st, ScaleStage):
            t = apply_scaler(
                fit_scaler(st.kind, t, sentinel=MVAE_SENTINEL if st.exempt_sentinels else None), t
            )
    pm = parent_map or {n: n for n in t.schema.names}
    kept, _ = _run_selection(
        stage, t, np.asarray(ds.labels), pm, derive_seed(config.seed, _STREAM_SELECT)
    )
    return kept


def _aggregate(folds: list[dict], model_names: list[str]) -> dict:
    out: dict = {}
    for name in model_names:
        metric_values: dict[str, list[float]] = {}
        for rec in folds:
            if rec["model"] != name:
                continue
            for metric, value in rec["metrics"].items():
                metric_values.setdefault(metric, []).append(value)
        out[name] = {
            metric: {
                "mean": float(np.mean(vals)),
                "std": float(np.std(vals)),
            }
            for metric, vals in metric_values.items()
        }
    return out


def thread_count() -> int:
    raw = os.environ.get("ICD_THREADS", "").strip()
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"ICD_THREADS must be an integer, got {raw!r}") from None


def run_experiment(ds: LabeledDataset, config: PipelineConfig) -> ExperimentResult:
    """Repeated stratified CV over the full pipeline; deterministic per seed."""
    validate_pipeline(config)
    plan = make_repeated_stratified_folds(ds, config.k, config.repeats, config.seed)
    frozen = _frozen_selection(ds, config)
    jobs = [
        (ds, config, r, f, tr_idx, va_idx, frozen)
        for r, f, tr_idx, va_idx in plan.iter_folds()
    ]
    results: dict[tuple[int, int], tuple[list[dict], dict]] = {}
    workers = thread_count()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for r, f, records, info in pool.map(_fold_worker, jobs):
                results[(r, f)] = (records, info)
    else:
        for job in jobs:
            r, f, records, info = _fold_worker(job)
            results[(r, f)] = (records, info)

    folds: list[dict] = []
    fold_info: list[dict] = []
    for r in range(config.repeats):
        for f in range(config.k):
            records, info = results[(r, f)]
            folds.extend(records)
            fold_info.append(info)

    names = _model_names(config.models)
    n0, n1 = ds.class_counts()
    manifest = {
        "label": config.label,
        "pipeline": config.to_json_dict(),
        "seed": config.seed,
        "k": config.k,
        "repeats": config.repeats,
        "dataset_fingerprint": fingerprint(ds),
        "n_rows": ds.table.n_rows,
        "class_counts": [n0, n1],
        "n_excluded_labels": ds.n_excluded_labels,
        "model_names": names,
        "frozen_selection": list(frozen) if frozen is not None else None,
        "fold_info": fold_info,
    }
    return ExperimentResult(
        manifest=manifest, folds=tuple(folds), aggregates=_aggregate(folds, names)
    )


# ---------------------------------------------------------------------------
# persistence and reporting


def export_result(result: ExperimentResult, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(result.to_json_dict(), indent=2, sort_keys=True) + "\n")
    return path


def load_result(path: str | Path) -> ExperimentResult:
    with Path(path).open() as fh:
        return ExperimentResult.from_json_dict(json.load(fh))


def format_cell(mean: float, std: float, scale: float = 1.0) -> str:
    """Render a mean/std pair the way summary tables print them."""
    return f"{mean * scale:.1f} (± {std * scale:.1f})"


def export_plot_data(obj, out_dir: str | Path) -> list[Path]:
    """Bar-chart and box-plot CSVs for a result, or delta CSV for a comparison."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    if isinstance(obj, ComparisonReport):
        path = out_dir / "comparison_deltas.csv"
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["model", "metric", "delta", "p_value"])
            for model, metrics in obj.per_model.items():
                for metric, entry in metrics.items():
                    w.writerow([model, metric, repr(entry["delta"]), repr(entry["p_value"])])
        return [path]

    result: ExperimentResult = obj
    group = result.manifest.get("label", "result")
    bar = out_dir / "aggregates_bar.csv"
    with bar.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["group", "model", "metric", "mean", "std"])
        for model, metrics in result.aggregates.items():
            for metric, ms in metrics.items():
                w.writerow([group, model, metric, repr(ms["mean"]), repr(ms["std"])])
    written.append(bar)
    box = out_dir / "folds_long.csv"
    with box.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["group", "model", "metric", "repeat", "fold", "value"])
        for rec in result.folds:
            for metric, value in rec["metrics"].items():
                w.writerow([group, rec["model"], metric, rec["repeat"], rec["fold"], repr(value)])
    written.append(box)
    return written


# ---------------------------------------------------------------------------
# comparison


@dataclass(frozen=True)
class ComparisonReport:
    base_label: str
    other_label: str
    n_pairs: int
    per_model: dict
    tree_average: dict
    reference: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "base_label": self.base_label,
            "other_label": self.other_label,
            "n_pairs": self.n_pairs,
            "per_model": self.per_model,
            "tree_average": self.tree_average,
            "reference": self.reference,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "ComparisonReport":
        return cls(
            base_label=d["base_label"],
            other_label=d["other_label"],
            n_pairs=int(d["n_pairs"]),
            per_model=d["per_model"],
            tree_average=d["tree_average"],
            reference=d.get("reference", {}),
        )


_REFERENCE_ANNOTATION = {
    "tree_f1_points": 3.6,
    "tree_mcc_points": 2.7,
    "note": "reference tree-model average deltas for the SET1-to-SET4 contrast",
}


def _fold_series(result: ExperimentResult, model: str, metric: str) -> np.ndarray:
    rows = [rec for rec in result.folds if rec["model"] == model]
    rows.sort(key=lambda rec: (rec["repeat"], rec["fold"]))
    return np.asarray([rec["metrics"][metric] for rec in rows], dtype=np.float64)


def compare(a: ExperimentResult, b: ExperimentResult) -> ComparisonReport:
    """Per-model metric deltas (b - a) with paired fold tests."""
    if a.manifest["dataset_fingerprint"] != b.manifest["dataset_fingerprint"]:
        raise ConfigError("comparison requires results from the same dataset")
    if (a.manifest["k"], a.manifest["repeats"]) != (b.manifest["k"], b.manifest["repeats"]):
        raise ConfigError("comparison requires identical cv plans")
    if a.manifest["model_names"] != b.manifest["model_names"]:
        raise ConfigError("comparison requires identical model lists")
    names = a.manifest["model_names"]
    kinds = {
        name: m["kind"]
        for name, m in zip(names, a.manifest["pipeline"]["models"])
    }
    metrics = sorted(next(iter(a.aggregates.values())).keys())
    per_model: dict = {}
    for name in names:
        per_model[name] = {}
        for metric in metrics:
            va = _fold_series(a, name, metric)
            vb = _fold_series(b, name, metric)
            if va.size != vb.size:
                raise ConfigError("comparison requires aligned fold records")
            test = paired_test(va, vb)
            per_model[name][metric] = {
                "delta": float((vb - va).mean()),
                "p_value": test.p_value,
                "degenerate": test.degenerate,
            }
    tree_names = [n for n in names if kinds.get(n) in TREE_MODEL_KINDS]
    tree_average = {}
    if tree_names:
        tree_average = {
            "f1_delta": float(np.mean([per_model[n]["f1"]["delta"] for n in tree_names])),
            "mcc_delta": float(np.mean([per_model[n]["mcc"]["delta"] for n in tree_names])),
            "models": tree_names,
        }
    n_pairs = a.manifest["k"] * a.manifest["repeats"]
    return ComparisonReport(
        base_label=a.manifest.get("label", "A"),
        other_label=b.manifest.get("label", "B"),
        n_pairs=n_pairs,
        per_model=per_model,
        tree_average=tree_average,
        reference=dict(_REFERENCE_ANNOTATION),
    )


# ---------------------------------------------------------------------------
# whole-dataset preparation (hyperparameter exploration)


def prepare_full_matrix(
    ds: LabeledDataset, stages: tuple
) -> tuple[np.ndarray, np.ndarray]:
    """Fit the encode stages on the entire dataset and return (X, y).

    Deliberately not CV-safe; meant for standalone grid exploration, where
    the final assessment still happens inside run_experiment.
    """
    t = ds.table
    for st in stages:
        if isinstance(st, MvaeStage):
            t = apply_mvae(fit_mvae(t), t)
        elif isinstance(st, ImputeStage):
            t = apply_impute(fit_impute(st.strategy, t, k=st.knn_k), t)
        elif isinstance(st, OneHotStage):
            t = apply_one_hot(fit_one_hot(t), t)
        elif isinstance(st, ScaleStage):
            t = apply_scaler(
                fit_scaler(st.kind, t, sentinel=MVAE_SENTINEL if st.exempt_sentinels else None), t
            )
        else:
            break
    return t.numeric_matrix(), np.asarray(ds.labels)
