"""``fdr-lab`` command line front end.

Every subcommand maps a library failure to the exit-status contract:
0 success, 2 config error, 3 netlist error, 4 simulation error, 5 model error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import __version__
from .errors import ConfigError, FdrLabError

log = logging.getLogger("fdrlab")

MODEL_CHOICES = ("ols", "knn", "svr")


# -- helpers ----------------------------------------------------------------


def _window(text):
    from .sim import parse_window

    return parse_window(text) if text else None


def _emit(obj, path: Optional[str]) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _kinds(values: Optional[List[str]]) -> List[str]:
    kinds = []
    for v in values or MODEL_CHOICES:
        kinds += [k.strip() for k in v.split(",") if k.strip()]
    bad = [k for k in kinds if k not in MODEL_CHOICES]
    if bad:
        raise ConfigError(f"unknown model kind(s): {', '.join(bad)}")
    return list(dict.fromkeys(kinds))


def _hyperparameters(args, kind: str):
    """Defaults, then an optional JSON file (``{"knn": {...}, "svr": {...}}``
    or a bare parameter dict), then explicit flags."""
    from .models import default_params, params_from_dict

    values = asdict(default_params(kind))
    if getattr(args, "hp", None):
        path = Path(args.hp)
        if not path.is_file():
            raise ConfigError(f"hyperparameter file not found: {path}")
        doc = json.loads(path.read_text())
        values.update(doc.get(kind, {}) if any(k in doc for k in MODEL_CHOICES) else doc)
    flags = {"knn": {"k": "k", "metric": "knn_metric"},
             "svr": {"C": "C", "gamma": "gamma", "epsilon": "epsilon"}}.get(kind, {})
    for field_name, attr in flags.items():
        if getattr(args, attr, None) is not None:
            values[field_name] = getattr(args, attr)
    try:
        return params_from_dict(kind, values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{kind}: {exc}") from None


def _dataset(args):
    from .dataset import load_dataset

    return load_dataset(args.features, args.fdr)


def _print_table(results) -> None:
    from .report import format_table1

    print(format_table1(results), file=sys.stderr)


# -- netlist / graph / sim / features / inject ------------------------------------


def cmd_netlist_check(args) -> int:
    from .graph import build_graph
    from .netlist import parse_netlist

    nl = parse_netlist(args.netlist)
    build_graph(nl)  # surfaces combinational loops
    _emit(nl.summary(), args.output)
    return 0


def cmd_graph_stats(args) -> int:
    from .graph import build_graph
    from .netlist import parse_netlist

    _emit(build_graph(parse_netlist(args.netlist)).stats(), args.output)
    return 0


def cmd_simulate(args) -> int:
    from .sim import load_stimulus, run_golden, write_trace

    from .netlist import parse_netlist

    nl = parse_netlist(args.netlist)
    stim = load_stimulus(args.stimulus, _window(args.observe))
    golden, activity = run_golden(nl, stim)
    write_trace(golden, activity, args.trace)
    log.info("simulated %d cycles, %d flip-flops", stim.cycles, len(activity.flip_flops))
    return 0


def cmd_features(args) -> int:
    from .features import extract_all, write_features
    from .graph import build_graph
    from .netlist import parse_netlist
    from .sim import load_stimulus, run_golden

    nl = parse_netlist(args.netlist)
    graph = build_graph(nl)
    stim = load_stimulus(args.stimulus, _window(args.observe))
    _, activity = run_golden(nl, stim)
    write_features(extract_all(nl, graph, graph.adjacency, activity), args.output)
    return 0


def cmd_inject(args) -> int:
    from .dataset import write_fdr
    from .inject import CampaignConfig, run_campaign
    from .netlist import parse_netlist
    from .sim import load_stimulus

    nl = parse_netlist(args.netlist)
    stim = load_stimulus(args.stimulus, _window(args.observe))
    mode = "exhaustive" if args.exhaustive else "statistical"
    cfg = CampaignConfig(args.per_ff, _window(args.window), args.seed, mode)
    only = args.ff or None
    records = run_campaign(nl, stim, cfg, flip_flops=only, jobs=args.jobs)
    write_fdr(records, args.output)
    log.info("%d flip-flops, mean FDR %.4f", len(records),
             float(np.mean([r.fdr for r in records])) if records else 0.0)
    return 0


# -- models / evaluation -----------------------------------------------------------


def cmd_search(args) -> int:
    from .evalharness import SearchSpace, hyperparameter_search

    data = _dataset(args)
    space = SearchSpace(random_samples=args.random_samples, grid_points=args.grid_points,
                        grid_factor=args.grid_factor)
    out = {}
    for kind in _kinds(args.model):
        if kind == "ols":
            continue
        best = hyperparameter_search(data, kind, space, args.seed, args.folds,
                                     args.training_size, args.metric, jobs=args.jobs)
        out[kind] = asdict(best)
    _emit(out, args.output)
    return 0


def cmd_train(args) -> int:
    from .models import fit, save_model

    data = _dataset(args)
    (kind,) = _kinds([args.model])
    save_model(fit(kind, data, _hyperparameters(args, kind)), args.output)
    return 0


def cmd_evaluate(args) -> int:
    from .evalharness import compute_metrics, cross_validate, table1_rows, write_rows
    from .models import load_model
    from .report import build_report, plot_fold_estimates

    data = _dataset(args)
    if args.holdout:
        # Score already trained models on the given rows (no refitting).
        rows = [["model", "MAE", "MAX", "RMSE", "EV", "R2"]]
        doc = {}
        for path in args.holdout:
            model = load_model(path)
            m = compute_metrics(data.y, model.predict(data.X)).as_dict()
            doc[Path(path).name] = build_report(kind=model.kind, **m)
            rows.append([model.kind] + [f"{m[k]:.6f}" for k in ("mae", "max", "rmse", "ev", "r2")])
        if args.output:
            write_rows(rows, args.output)
        _emit(doc, args.report)
        return 0
    results = {}
    for kind in _kinds(args.model):
        results[kind] = cross_validate(data, kind, _hyperparameters(args, kind), args.folds,
                                       args.training_size, args.seed)
    write_rows(table1_rows(results), args.output)
    if args.report:
        _emit(build_report(cross_validation={k: r.summary() for k, r in results.items()}), args.report)
    if args.plot:
        plot_fold_estimates(results, data.y, args.plot)
    _print_table(results)
    return 0


def cmd_learning_curve(args) -> int:
    from .evalharness import DEFAULT_SIZES, learning_curve, learning_curve_rows, write_rows
    from .report import plot_learning_curves

    data = _dataset(args)
    sizes = tuple(float(s) for s in args.sizes.split(",")) if args.sizes else DEFAULT_SIZES
    curves = {kind: learning_curve(data, kind, _hyperparameters(args, kind), sizes, args.folds, args.seed)
              for kind in _kinds(args.model)}
    write_rows(learning_curve_rows(curves), args.output)
    if args.plot:
        plot_learning_curves(curves, args.plot)
    return 0


def cmd_predict(args) -> int:
    from .dataset import read_features
    from .evalharness import write_rows
    from .models import load_model

    model = load_model(args.model)
    features = read_features(args.features)
    names = sorted(features)
    X = np.array([features[n] for n in names], dtype=float).reshape(len(names), -1)
    y_hat = model.predict(X) if names else np.zeros(0)
    rows = [["ff_name", "fdr_estimate", "outside_unit_interval"]]
    rows += [[n, repr(float(v)), int(v < 0 or v > 1)] for n, v in zip(names, y_hat)]
    write_rows(rows, args.output)
    flagged = int(np.sum((y_hat < 0) | (y_hat > 1)))
    if flagged:
        log.warning("%d prediction(s) fall outside [0, 1]", flagged)
    return 0


# -- pipeline ----------------------------------------------------------------------


def default_config_path() -> Path:
    from .circuits import bundled_path

    return bundled_path("desk_composite.ini")


def cmd_pipeline(args) -> int:
    from .pipeline import StageError, load_config, run_pipeline
    from .report import MODEL_LABELS

    cfg = load_config(args.config or default_config_path())
    if args.config is None:
        cfg.output = Path("fdrlab-out").resolve()
    overrides = {
        "output": Path(args.out) if args.out else None,
        "per_ff": args.per_ff,
        "inject_seed": args.seed,
        "search_seed": args.seed,
        "eval_seed": args.seed,
        "folds": args.folds,
        "training_size": args.training_size,
        "search": False if args.no_search else None,
        "plots": False if args.no_plots else None,
        "models": tuple(_kinds(args.model)) if args.model else None,
    }
    if args.random_samples is not None:
        overrides["space"] = replace(cfg.space, random_samples=args.random_samples)
    cfg = replace(cfg, **{k: v for k, v in overrides.items() if v is not None})
    try:
        report = run_pipeline(cfg, jobs=args.jobs)
    except StageError as exc:
        print(f"fdr-lab: pipeline stage '{exc.stage}' failed: {exc.error}", file=sys.stderr)
        return exc.error.exit_code
    print(f"wrote {cfg.output}", file=sys.stderr)
    for row in report["table1"]:
        print(f"{MODEL_LABELS[row['model']]:<22} MAE {row['MAE']:.3f}  R2 "
              f"{row['R2'] if row['R2'] is None else round(row['R2'], 3)}", file=sys.stderr)
    return 0


def cmd_bundle(args) -> int:
    from .circuits import write_bundled

    for path in write_bundled(Path(args.directory)):
        print(path)
    return 0


# -- parser ------------------------------------------------------------------------


def _add_jobs(p):
    p.add_argument("--jobs", "-j", type=int, default=1, help="worker processes (results do not depend on it)")


def _add_dataset(p):
    p.add_argument("features", help="features CSV (ff_name + feature columns)")
    p.add_argument("fdr", help="FDR CSV (ff_name, ..., fdr)")


def _add_hp(p):
    p.add_argument("--hp", help="JSON hyperparameter file, e.g. the output of 'search'")
    p.add_argument("--k", type=int)
    p.add_argument("--knn-metric", choices=("manhattan", "euclidean"))
    p.add_argument("--C", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--epsilon", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fdr-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("netlist", help="netlist utilities")
    nsub = p.add_subparsers(dest="action", required=True)
    q = nsub.add_parser("check", help="validate a netlist and print a summary")
    q.add_argument("netlist")
    q.add_argument("-o", "--output")
    q.set_defaults(func=cmd_netlist_check)

    p = sub.add_parser("graph", help="circuit graph utilities")
    gsub = p.add_subparsers(dest="action", required=True)
    q = gsub.add_parser("stats", help="node, edge and flip-flop counts as JSON")
    q.add_argument("netlist")
    q.add_argument("-o", "--output")
    q.set_defaults(func=cmd_graph_stats)

    p = sub.add_parser("simulate", help="fault-free simulation")
    p.add_argument("netlist")
    p.add_argument("stimulus")
    p.add_argument("--trace", required=True, help="output CSV of outputs and flip-flop states")
    p.add_argument("--observe", help="observe window A..B (inclusive)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("features", help="per-flip-flop feature extraction")
    p.add_argument("netlist")
    p.add_argument("stimulus")
    p.add_argument("--observe")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("inject", help="SEU fault-injection campaign")
    p.add_argument("netlist")
    p.add_argument("stimulus")
    p.add_argument("--per-ff", type=int, default=170)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--window", help="active injection window A..B")
    p.add_argument("--observe", help="observe window A..B")
    p.add_argument("--exhaustive", action="store_true", help="inject once at every cycle of the window")
    p.add_argument("--ff", action="append", help="restrict to this flip-flop (repeatable)")
    p.add_argument("-o", "--output", required=True)
    _add_jobs(p)
    p.set_defaults(func=cmd_inject)

    p = sub.add_parser("search", help="random-then-grid hyperparameter search")
    _add_dataset(p)
    p.add_argument("--model", action="append", help="knn and/or svr (default: both)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--training-size", type=float, default=0.5)
    p.add_argument("--metric", default="r2", choices=("mae", "max", "rmse", "ev", "r2"))
    p.add_argument("--random-samples", type=int, default=60)
    p.add_argument("--grid-points", type=int, default=5)
    p.add_argument("--grid-factor", type=float, default=4.0)
    p.add_argument("-o", "--output")
    _add_jobs(p)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("train", help="fit one model on every row and save it")
    _add_dataset(p)
    p.add_argument("--model", required=True, choices=MODEL_CHOICES)
    _add_hp(p)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="stratified cross-validation, one row per model")
    _add_dataset(p)
    p.add_argument("--model", action="append")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--training-size", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--holdout", action="append", metavar="MODEL_JSON",
                   help="score a trained model on these rows instead of cross-validating")
    _add_hp(p)
    p.add_argument("-o", "--output")
    p.add_argument("--report", help="JSON report path (stdout if omitted with --holdout)")
    p.add_argument("--plot", help="PNG of measured vs. estimated FDR on the first fold")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("learning-curve", help="cross-validation over training sizes")
    _add_dataset(p)
    p.add_argument("--model", action="append")
    p.add_argument("--sizes", help="comma separated fractions (default: 9-point grid)")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    _add_hp(p)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--plot", help="PNG output path")
    p.set_defaults(func=cmd_learning_curve)

    p = sub.add_parser("predict", help="apply a saved model to a features CSV")
    p.add_argument("model")
    p.add_argument("features")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("pipeline", help="run the whole estimation flow from a config file")
    p.add_argument("config", nargs="?", help="INI config (default: bundled desk-scale circuit)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--per-ff", type=int)
    p.add_argument("--seed", type=int, help="overrides every seed in the config")
    p.add_argument("--folds", type=int)
    p.add_argument("--training-size", type=float)
    p.add_argument("--model", action="append")
    p.add_argument("--random-samples", type=int)
    p.add_argument("--no-search", action="store_true")
    p.add_argument("--no-plots", action="store_true")
    _add_jobs(p)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("bundle", help="write the bundled toy and desk-scale circuits to a directory")
    p.add_argument("directory")
    p.set_defaults(func=cmd_bundle)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "jobs", 1) < 1:
        parser.error("--jobs must be >= 1")
    try:
        return args.func(args)
    except FdrLabError as exc:
        print(f"fdr-lab: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"fdr-lab: {exc}", file=sys.stderr)
        return ConfigError.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
