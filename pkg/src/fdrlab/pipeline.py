"""End-to-end estimation flow driven by one INI config file.

Sections mirror the modules::

    [netlist]      path
    [sim]          stimulus, observe_window = A..B
    [inject]       per_ff, window = A..B, seed, mode = statistical|exhaustive
    [models]       kinds, search, knn_k, knn_metric, svr_C, svr_gamma, svr_epsilon
    [search]       random_samples, grid_points, grid_factor, folds, training_size, metric, seed
    [evalharness]  folds, training_size, seed, learning_curve_sizes
    [output]       directory, plots

Relative paths resolve against the config file's directory.
"""
from __future__ import annotations

import configparser
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from .dataset import join, write_fdr
from .errors import ConfigError, FdrLabError
from .evalharness import (
    DEFAULT_SIZES,
    SearchSpace,
    compute_metrics,
    cross_validate,
    hyperparameter_search,
    learning_curve,
    learning_curve_rows,
    table1_rows,
    write_rows,
)
from .features import extract_all, write_features
from .graph import build_graph
from .inject import CampaignConfig, run_campaign, split_dataset
from .models import KnnParams, SvrParams, default_params, fit, save_model
from .netlist import parse_netlist
from .sim import load_stimulus, parse_window, run_golden

log = logging.getLogger(__name__)

ARTIFACTS = ("features.csv", "fdr.csv", "predictions.csv", "report.json", "learning_curve.csv")


@dataclass
class RunConfig:
    netlist: Path
    stimulus: Path
    observe_window: Optional[Tuple[int, int]] = None
    per_ff: int = 170
    active_window: Optional[Tuple[int, int]] = None
    inject_seed: int = 2019
    mode: str = "statistical"
    models: Tuple[str, ...] = ("ols", "knn", "svr")
    search: bool = True
    knn: KnnParams = field(default_factory=KnnParams)
    svr: SvrParams = field(default_factory=SvrParams)
    space: SearchSpace = field(default_factory=SearchSpace)
    search_folds: int = 5
    search_training_size: float = 1.0
    search_metric: str = "r2"
    search_seed: int = 2019
    folds: int = 10
    training_size: float = 0.5
    eval_seed: int = 2019
    sizes: Tuple[float, ...] = DEFAULT_SIZES
    output: Path = Path("fdrlab-out")
    plots: bool = True

    def validate(self) -> None:
        if not Path(self.netlist).is_file():
            raise ConfigError(f"netlist file not found: {self.netlist}")
        if not Path(self.stimulus).is_file():
            raise ConfigError(f"stimulus file not found: {self.stimulus}")
        bad = [m for m in self.models if m not in ("ols", "knn", "svr")]
        if bad:
            raise ConfigError(f"unknown model kind(s): {', '.join(bad)}")
        if not 0 < self.training_size < 1:
            raise ConfigError(f"evalharness.training_size must lie in (0, 1), got {self.training_size}")
        if self.folds < 2:
            raise ConfigError("evalharness.folds must be >= 2")


def _window(text: Optional[str]):
    return parse_window(text) if text else None


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    cp = configparser.ConfigParser()
    try:
        cp.read(path)
        base = path.parent

        def p(section, key):
            value = cp.get(section, key)
            return (base / value).resolve() if not Path(value).is_absolute() else Path(value)

        cfg = RunConfig(netlist=p("netlist", "path"), stimulus=p("sim", "stimulus"))
        cfg.observe_window = _window(cp.get("sim", "observe_window", fallback=None))
        if cp.has_section("inject"):
            s = cp["inject"]
            cfg.per_ff = s.getint("per_ff", cfg.per_ff)
            cfg.active_window = _window(s.get("window", None))
            cfg.inject_seed = s.getint("seed", cfg.inject_seed)
            cfg.mode = s.get("mode", cfg.mode)
        if cp.has_section("models"):
            s = cp["models"]
            cfg.models = tuple(m.strip() for m in s.get("kinds", "ols, knn, svr").split(",") if m.strip())
            cfg.search = s.getboolean("search", cfg.search)
            cfg.knn = KnnParams(s.getint("knn_k", 3), s.get("knn_metric", "manhattan"))
            cfg.svr = SvrParams(s.getfloat("svr_C", 3.5), s.getfloat("svr_gamma", 0.055),
                                s.getfloat("svr_epsilon", 0.025))
        if cp.has_section("search"):
            s = cp["search"]
            cfg.space = SearchSpace(
                random_samples=s.getint("random_samples", 60),
                grid_points=s.getint("grid_points", 5),
                grid_factor=s.getfloat("grid_factor", 4.0),
            )
            cfg.search_folds = s.getint("folds", cfg.search_folds)
            cfg.search_training_size = s.getfloat("training_size", cfg.search_training_size)
            cfg.search_metric = s.get("metric", cfg.search_metric)
            cfg.search_seed = s.getint("seed", cfg.search_seed)
        if cp.has_section("evalharness"):
            s = cp["evalharness"]
            cfg.folds = s.getint("folds", cfg.folds)
            cfg.training_size = s.getfloat("training_size", cfg.training_size)
            cfg.eval_seed = s.getint("seed", cfg.eval_seed)
            sizes = s.get("learning_curve_sizes", None)
            if sizes:
                cfg.sizes = tuple(float(x) for x in sizes.split(","))
        if cp.has_section("output"):
            s = cp["output"]
            out = s.get("directory", str(cfg.output))
            cfg.output = Path(out) if Path(out).is_absolute() else (base / out).resolve()
            cfg.plots = s.getboolean("plots", cfg.plots)
    except (configparser.Error, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return cfg


class StageError(Exception):
    def __init__(self, stage: str, error: FdrLabError):
        self.stage = stage
        self.error = error
        super().__init__(f"stage '{stage}' failed: {error}")


def run_pipeline(cfg: RunConfig, jobs: int = 1) -> dict:
    """Run parse -> graph -> simulate -> features -> inject -> split ->
    search -> train -> evaluate -> learning curve, writing every artifact to
    ``cfg.output``. On failure a ``.partial`` marker names the stage."""
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    marker = out / ".partial"
    if marker.exists():
        marker.unlink()
    stage = "config"
    try:
        cfg.validate()
        stage = "parse"
        netlist = parse_netlist(cfg.netlist)
        stage = "graph"
        graph = build_graph(netlist)
        stage = "simulate"
        stimulus = load_stimulus(cfg.stimulus, cfg.observe_window)
        _, activity = run_golden(netlist, stimulus)
        stage = "features"
        features = extract_all(netlist, graph, graph.adjacency, activity)
        write_features(features, out / "features.csv")
        stage = "inject"
        campaign = CampaignConfig(cfg.per_ff, cfg.active_window, cfg.inject_seed, cfg.mode)
        records = run_campaign(netlist, stimulus, campaign, jobs=jobs)
        write_fdr(records, out / "fdr.csv")
        data = join(features, {r.ff_name: r.fdr for r in records})

        stage = "split"
        train, test = split_dataset(records, features, cfg.training_size, cfg.eval_seed)

        stage = "search"
        hps = {"ols": default_params("ols"), "knn": cfg.knn, "svr": cfg.svr}
        search_info = {}
        if cfg.search:
            for kind in cfg.models:
                if kind == "ols":
                    continue
                hps[kind] = hyperparameter_search(
                    train, kind, cfg.space, cfg.search_seed, cfg.search_folds,
                    cfg.search_training_size, cfg.search_metric, jobs=jobs)
                search_info[kind] = asdict(hps[kind])

        stage = "train"
        trained = {kind: fit(kind, train, hps[kind]) for kind in cfg.models}
        (out / "models").mkdir(exist_ok=True)
        for kind, model in trained.items():
            save_model(model, out / "models" / f"{kind}.json")

        stage = "evaluate"
        predictions = {kind: m.predict(test.X) for kind, m in trained.items()}
        holdout = {kind: compute_metrics(test.y, p).as_dict() for kind, p in predictions.items()}
        rows = [["ff_name", "fdr", *cfg.models, "outside_unit_interval"]]
        for i, name in enumerate(test.names):
            vals = [predictions[k][i] for k in cfg.models]
            rows.append([name, repr(float(test.y[i])), *(repr(float(v)) for v in vals),
                         sum(1 for v in vals if v < 0 or v > 1)])
        write_rows(rows, out / "predictions.csv")
        cv = {kind: cross_validate(data, kind, hps[kind], cfg.folds, cfg.training_size, cfg.eval_seed)
              for kind in cfg.models}
        write_rows(table1_rows(cv), out / "table1.csv")

        stage = "learning-curve"
        curves = {kind: learning_curve(data, kind, hps[kind], cfg.sizes, cfg.folds, cfg.eval_seed)
                  for kind in cfg.models}
        write_rows(learning_curve_rows(curves), out / "learning_curve.csv")

        stage = "report"
        from .report import (build_report, plot_fdr_histogram, plot_fold_estimates,
                             plot_learning_curves, table1_entries, write_report)

        fdr = np.array([r.fdr for r in records])
        report = build_report(
            circuit={"name": netlist.name, "flip_flops": len(records),
                     "cells": len(netlist.cells)},
            campaign={"mode": cfg.mode, "injections_per_ff": records[0].injections if records else cfg.per_ff,
                      "active_window": list(campaign.active_window or (0, stimulus.cycles - 1)),
                      "observe_window": list(stimulus.observe_window),
                      "seed": cfg.inject_seed, "mean_fdr": float(fdr.mean()) if len(fdr) else 0.0},
            evaluation={"folds": cfg.folds, "training_size": cfg.training_size, "seed": cfg.eval_seed},
            split={"training_size": cfg.training_size, "train_rows": len(train), "test_rows": len(test)},
            table1=table1_entries(cv),
            cross_validation={kind: r.summary() for kind, r in cv.items()},
            holdout=holdout,
            hyperparameters={kind: asdict(hps[kind]) for kind in cfg.models},
            search={"enabled": cfg.search, "folds": cfg.search_folds,
                    "training_size": cfg.search_training_size, "metric": cfg.search_metric,
                    "selected": search_info},
        )
        write_report(report, out / "report.json")
        if cfg.plots:
            plot_learning_curves(curves, out / "learning_curve.png")
            plot_fold_estimates(cv, data.y, out / "fold_estimates.png")
            plot_fdr_histogram(fdr, out / "fdr_histogram.png")
        return report
    except FdrLabError as exc:
        marker.write_text(json.dumps({"stage": stage, "error": str(exc)}) + "\n")
        raise StageError(stage, exc) from exc
