"""Command-line entry points.

Exit codes: 0 success, 2 configuration error, 3 data error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .dataset import FeatureSchema, NUMERICAL, cohort_summary, load_csv
from .errors import ConfigError, DataError
from .models import GridSpec, MODEL_KINDS, grid_search, make_config
from .pipeline import (
    PipelineConfig,
    SET_IDS,
    build_set,
    compare,
    export_plot_data,
    export_result,
    format_cell,
    load_result,
    prepare_full_matrix,
    run_experiment,
)
from .synth import DEFAULT_N, DEFAULT_SEED, write_synthetic_csv


def _read_json(path: str, what: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {what} file {path!r}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{what} file {path!r} is not valid JSON: {exc}") from None


def _load_dataset(data_path: str, schema_path: str):
    schema = FeatureSchema.from_json_dict(_read_json(schema_path, "schema"))
    return load_csv(data_path, schema)


def _cmd_summarize(args) -> int:
    ds = _load_dataset(args.data, args.schema)
    rep = cohort_summary(ds)
    print(f"rows: {ds.table.n_rows}  class0: {rep.n_class0}  class1: {rep.n_class1}"
          f"  excluded: {ds.n_excluded_labels}")
    for f in rep.features:
        if f.skipped:
            print(f"{f.name}: skipped ({f.skip_reason})")
            continue
        if f.kind == NUMERICAL:
            g0, g1 = f.groups["class0"], f.groups["class1"]
            print(f"{f.name}: {g0['mean']:.3f} +/- {g0['sd']:.3f} (n={g0['n']})"
                  f" vs {g1['mean']:.3f} +/- {g1['sd']:.3f} (n={g1['n']})"
                  f"  p={f.p_value:.4g} [{f.test_name}]")
        else:
            cats = sorted(set(f.groups["class0"]) | set(f.groups["class1"]))
            parts = []
            for c in cats:
                e0 = f.groups["class0"].get(c, {"count": 0, "percent": 0.0})
                e1 = f.groups["class1"].get(c, {"count": 0, "percent": 0.0})
                parts.append(f"{c} {e0['count']} ({e0['percent']:.1f}%) vs"
                             f" {e1['count']} ({e1['percent']:.1f}%)")
            print(f"{f.name}: {'; '.join(parts)}  p={f.p_value:.4g} [{f.test_name}]")
    return 0


def _cmd_run(args) -> int:
    ds = _load_dataset(args.data, args.schema)
    if args.pipeline:
        config = PipelineConfig.from_json_dict(_read_json(args.pipeline, "pipeline"))
        if args.seed is not None:
            config = replace(config, seed=args.seed)
    else:
        models = None
        if args.models:
            kinds = [k.strip() for k in args.models.split(",") if k.strip()]
            for k in kinds:
                if k not in MODEL_KINDS:
                    raise ConfigError(f"unknown model kind {k!r}")
            models = tuple(make_config(k) for k in kinds)
        config = build_set(
            args.set,
            models=models,
            k=args.k,
            repeats=args.repeats,
            seed=args.seed if args.seed is not None else 0,
        )
    result = run_experiment(ds, config)
    export_result(result, args.out)
    for model, metrics in result.aggregates.items():
        f1 = metrics["f1"]
        print(f"{model}: f1 {format_cell(f1['mean'], f1['std'])}")
    print(f"wrote {args.out}")
    return 0


def _cmd_grid(args) -> int:
    ds = _load_dataset(args.data, args.schema)
    grid = _read_json(args.grid, "grid")
    stages = build_set(args.set).stages
    X, y = prepare_full_matrix(ds, stages)
    spec = GridSpec(kind=args.model, grid=grid, scoring=args.scoring, cv_folds=args.folds)
    best, results = grid_search(spec, X, y, seed=args.seed)
    payload = {"best": best.to_json_dict(), "results": results}
    if args.out:
        Path(args.out).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        print(f"wrote {args.out}")
    print(f"best params: {json.dumps(best.params, sort_keys=True)}")
    return 0


def _cmd_compare(args) -> int:
    a = load_result(args.result_a)
    b = load_result(args.result_b)
    rep = compare(a, b)
    Path(args.out).write_text(json.dumps(rep.to_json_dict(), indent=2, sort_keys=True) + "\n")
    for model, metrics in rep.per_model.items():
        f1 = metrics["f1"]
        print(f"{model}: f1 delta {f1['delta']:+.2f} (p={f1['p_value']:.4g})")
    if rep.tree_average:
        print(f"tree-model average: f1 {rep.tree_average['f1_delta']:+.2f},"
              f" mcc {rep.tree_average['mcc_delta']:+.2f}")
    print(f"wrote {args.out}")
    return 0


def _cmd_report(args) -> int:
    result = load_result(args.result)
    metrics = sorted(next(iter(result.aggregates.values()), {}).keys())
    label = result.manifest.get("label", "result")
    print(f"{label}  (k={result.manifest['k']}, repeats={result.manifest['repeats']},"
          f" seed={result.manifest['seed']})")
    header = ["model"] + metrics
    rows = [header]
    for model, agg in result.aggregates.items():
        rows.append([model] + [format_cell(agg[m]["mean"], agg[m]["std"]) for m in metrics])
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    for r in rows:
        print("  ".join(cell.ljust(w) for cell, w in zip(r, widths)))
    if args.plots:
        paths = export_plot_data(result, args.plots)
        for p in paths:
            print(f"wrote {p}")
    return 0


def _cmd_synth(args) -> int:
    csv_path, schema_path = write_synthetic_csv(args.out, n=args.n, seed=args.seed)
    print(f"wrote {csv_path}")
    print(f"wrote {schema_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="icdpipe")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("summarize", help="per-feature cohort statistics with group tests")
    p.add_argument("data", help="CSV file")
    p.add_argument("schema", help="schema JSON file")
    p.set_defaults(func=_cmd_summarize)

    p = sub.add_parser("run", help="run a pipeline experiment with repeated stratified CV")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--set", choices=SET_IDS, help="standard stage composition")
    g.add_argument("--pipeline", help="pipeline config JSON file")
    p.add_argument("--data", required=True, help="CSV file")
    p.add_argument("--schema", required=True, help="schema JSON file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--k", type=int, default=10, help="folds per repeat")
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--models", help="comma-separated model kinds (default: all five)")
    p.add_argument("--out", required=True, help="result JSON path")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("grid", help="grid search on the whole prepared matrix")
    p.add_argument("--model", required=True, choices=MODEL_KINDS)
    p.add_argument("--grid", required=True, help="JSON file: param -> list of values")
    p.add_argument("--data", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--set", default="SET1", choices=SET_IDS,
                   help="stage composition whose encode stages prepare the matrix")
    p.add_argument("--scoring", default="f1", choices=("f1", "mcc", "roc_auc"))
    p.add_argument("--folds", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="JSON path for best config and fold scores")
    p.set_defaults(func=_cmd_grid)

    p = sub.add_parser("compare", help="paired per-model comparison of two results")
    p.add_argument("result_a")
    p.add_argument("result_b")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("report", help="render aggregate table; optionally write plot CSVs")
    p.add_argument("result")
    p.add_argument("--plots", help="directory for plot-ready CSV files")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("synth", help="write the built-in synthetic dataset")
    p.add_argument("--out", required=True, help="CSV path (schema JSON written alongside)")
    p.add_argument("--n", type=int, default=DEFAULT_N)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.set_defaults(func=_cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
