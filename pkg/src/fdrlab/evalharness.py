"""Regression metrics, stratified cross-validation, random-then-grid
hyperparameter search and learning curves."""
from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .dataset import Dataset, quantile_strata, round_half_up, stratified_subsample, STRATA_BINS
from .errors import (
    ConfigError,
    EmptyDataset,
    KTooLarge,
    LengthMismatch,
    ModelError,
    NonConvergence,
    NonSearchable,
    TooFewSamples,
    ZeroVariance,
)
from .models import KnnParams, SvrParams, default_params, fit

log = logging.getLogger(__name__)

METRICS = ("mae", "max", "rmse", "ev", "r2")
METRIC_LABELS = {"mae": "MAE", "max": "MAX", "rmse": "RMSE", "ev": "EV", "r2": "R2"}
DEFAULT_SIZES = (0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8)


# -- metrics ------------------------------------------------------------------


def _pair(y, y_hat):
    y = np.asarray(y, dtype=float).ravel()
    y_hat = np.asarray(y_hat, dtype=float).ravel()
    if y.shape != y_hat.shape:
        raise LengthMismatch(f"{len(y)} targets vs {len(y_hat)} predictions")
    if len(y) == 0:
        raise EmptyDataset("metrics need at least one sample")
    return y, y_hat


def metric_mae(y, y_hat) -> float:
    y, y_hat = _pair(y, y_hat)
    return float(np.mean(np.abs(y - y_hat)))


def metric_max(y, y_hat) -> float:
    y, y_hat = _pair(y, y_hat)
    return float(np.max(np.abs(y - y_hat)))


def metric_rmse(y, y_hat) -> float:
    y, y_hat = _pair(y, y_hat)
    resid = np.abs(y - y_hat)
    # scale by the largest residual so tiny errors do not underflow when squared
    top = resid.max()
    if top == 0:
        return 0.0
    return float(top * np.sqrt(np.mean((resid / top) ** 2)))


def metric_ev(y, y_hat) -> float:
    """Explained variance with population variances."""
    y, y_hat = _pair(y, y_hat)
    var_y = np.var(y)
    if var_y == 0:
        raise ZeroVariance("explained variance undefined for constant targets")
    return float(1.0 - np.var(y - y_hat) / var_y)


def metric_r2(y, y_hat) -> float:
    y, y_hat = _pair(y, y_hat)
    ss_tot = np.sum((y - y.mean()) ** 2)
    if ss_tot == 0:
        raise ZeroVariance("R2 undefined for constant targets")
    return float(1.0 - np.sum((y - y_hat) ** 2) / ss_tot)


@dataclass(frozen=True)
class MetricSet:
    mae: float
    max: float
    rmse: float
    ev: float
    r2: float

    def as_dict(self) -> Dict[str, float]:
        return asdict(self)


def compute_metrics(y, y_hat) -> MetricSet:
    """All five metrics; EV and R2 are NaN when the targets are constant."""
    out = {"mae": metric_mae(y, y_hat), "max": metric_max(y, y_hat), "rmse": metric_rmse(y, y_hat)}
    for name, fn in (("ev", metric_ev), ("r2", metric_r2)):
        try:
            out[name] = fn(y, y_hat)
        except ZeroVariance:
            out[name] = math.nan
    return MetricSet(**out)


# -- folds ----------------------------------------------------------------------


def _targets(data) -> np.ndarray:
    return data.y if isinstance(data, Dataset) else np.asarray(data, dtype=float)


def stratified_folds(data, folds: int, seed: int) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Split into ``folds`` (train, test) index pairs stratified by FDR bins.

    Strata are 5 quantile bins (smaller than ``folds`` members merged). Each
    stratum is shuffled and dealt round-robin, continuing across strata, so
    fold sizes differ by at most one overall and within each stratum.
    """
    y = _targets(data)
    n = len(y)
    if folds < 2:
        raise ConfigError(f"need at least 2 folds, got {folds}")
    if n < folds:
        raise TooFewSamples(f"{n} samples cannot fill {folds} folds")
    rng = np.random.default_rng(seed)
    strata = quantile_strata(y, STRATA_BINS, min_size=folds)
    order = np.concatenate([rng.permutation(np.flatnonzero(strata == s)) for s in range(strata.max() + 1)])
    assign = np.empty(n, dtype=int)
    assign[order] = np.arange(n) % folds
    out = []
    for f in range(folds):
        out.append((np.flatnonzero(assign != f), np.flatnonzero(assign == f)))
    return out


# -- cross-validation ---------------------------------------------------------------


@dataclass
class CvResult:
    model_kind: str
    hyperparameters: object
    folds: int
    training_size: float
    per_fold: List[MetricSet]
    train_sizes: List[int]
    predictions: np.ndarray  # out-of-fold prediction for every row
    fold_of: np.ndarray
    names: Tuple[str, ...] = ()

    def mean(self, metric: str) -> float:
        vals = np.array([getattr(m, metric) for m in self.per_fold])
        return float(np.nanmean(vals)) if np.any(~np.isnan(vals)) else math.nan

    def std(self, metric: str) -> float:
        vals = np.array([getattr(m, metric) for m in self.per_fold])
        return float(np.nanstd(vals)) if np.any(~np.isnan(vals)) else math.nan

    @property
    def out_of_range(self) -> int:
        return int(np.sum((self.predictions < 0) | (self.predictions > 1)))

    def summary(self) -> dict:
        return {
            "model": self.model_kind,
            "hyperparameters": asdict(self.hyperparameters),
            "folds": self.folds,
            "training_size": self.training_size,
            "mean": {m: self.mean(m) for m in METRICS},
            "std": {m: self.std(m) for m in METRICS},
            "per_fold": [m.as_dict() for m in self.per_fold],
            "mean_train_rows": float(np.mean(self.train_sizes)),
            "predictions_outside_unit_interval": self.out_of_range,
        }


def _fold_rng(seed: int, fold: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(fold,)))


def cross_validate(
    dataset: Dataset,
    model_kind: str,
    hp=None,
    folds: int = 10,
    training_size: float = 0.5,
    seed: int = 0,
    fitter: Optional[Callable] = None,
) -> CvResult:
    """k-fold CV where each fold trains on a stratified ``training_size``
    fraction of its non-test rows (1.0 = all of them)."""
    if not 0 < training_size <= 1:
        raise ConfigError(f"training size must lie in (0, 1], got {training_size}")
    hp = hp if hp is not None else default_params(model_kind)
    fitter = fitter or (lambda train: fit(model_kind, train, hp))
    splits = stratified_folds(dataset, folds, seed)
    per_fold, sizes = [], []
    preds = np.full(len(dataset), np.nan)
    fold_of = np.empty(len(dataset), dtype=int)
    for f, (rest, test) in enumerate(splits):
        if training_size < 1:
            n_sub = max(1, round_half_up(training_size * len(rest)))
            chosen, _ = stratified_subsample(dataset.y[rest], n_sub, _fold_rng(seed, f))
            train_idx = rest[chosen]
        else:
            train_idx = rest
        model = fitter(dataset.subset(train_idx))
        y_hat = model.predict(dataset.X[test])
        preds[test] = y_hat
        fold_of[test] = f
        per_fold.append(compute_metrics(dataset.y[test], y_hat))
        sizes.append(len(train_idx))
    return CvResult(model_kind, hp, folds, training_size, per_fold, sizes, preds, fold_of, dataset.names)


# -- hyperparameter search -------------------------------------------------------


@dataclass(frozen=True)
class SearchSpace:
    k_range: Tuple[int, int] = (1, 15)
    metrics: Tuple[str, ...] = ("manhattan", "euclidean")
    C_range: Tuple[float, float] = (0.1, 100.0)  # log-uniform
    gamma_range: Tuple[float, float] = (1e-3, 1.0)  # log-uniform
    epsilon_range: Tuple[float, float] = (0.0, 0.1)  # uniform
    random_samples: int = 60
    grid_points: int = 5
    grid_factor: float = 4.0

    def __post_init__(self):
        if self.k_range[0] < 1 or self.k_range[1] < self.k_range[0]:
            raise ConfigError(f"bad k range {self.k_range}")
        for name in ("C_range", "gamma_range"):
            lo, hi = getattr(self, name)
            if not 0 < lo <= hi:
                raise ConfigError(f"{name} must be positive, got {(lo, hi)}")
        lo, hi = self.epsilon_range
        if not 0 <= lo <= hi:
            raise ConfigError(f"bad epsilon range {(lo, hi)}")
        if self.random_samples < 1 or self.grid_points < 1 or self.grid_factor < 1:
            raise ConfigError("search budgets must be positive")


def _log_uniform(rng, lo, hi):
    value = math.exp(rng.uniform(math.log(lo), math.log(hi)))
    return float(min(max(value, lo), hi))


def _random_candidates(kind: str, space: SearchSpace, rng) -> list:
    out = []
    for _ in range(space.random_samples):
        if kind == "knn":
            k = int(rng.integers(space.k_range[0], space.k_range[1] + 1))
            metric = space.metrics[int(rng.integers(len(space.metrics)))]
            out.append(KnnParams(k, metric))
        else:
            C = _log_uniform(rng, *space.C_range)
            gamma = _log_uniform(rng, *space.gamma_range)
            eps = float(rng.uniform(*space.epsilon_range))
            out.append(SvrParams(C, gamma, eps))
    return out


def _log_grid(center, bounds, space):
    lo = max(bounds[0], center / space.grid_factor)
    hi = min(bounds[1], center * space.grid_factor)
    return sorted(set(np.geomspace(lo, hi, space.grid_points).tolist())) if hi > lo else [center]


def _grid_candidates(kind: str, best, space: SearchSpace) -> list:
    n = space.grid_points
    if kind == "knn":
        half = n // 2
        ks = range(max(space.k_range[0], best.k - half), min(space.k_range[1], best.k + half) + 1)
        return [KnnParams(k, m) for k in ks for m in space.metrics]
    Cs = _log_grid(best.C, space.C_range, space)
    gammas = _log_grid(best.gamma, space.gamma_range, space)
    lo, hi = space.epsilon_range
    half_width = (hi - lo) / 8
    e_lo, e_hi = max(lo, best.epsilon - half_width), min(hi, best.epsilon + half_width)
    eps = sorted(set(np.linspace(e_lo, e_hi, n).tolist())) if e_hi > e_lo else [best.epsilon]
    return [SvrParams(C, g, e) for C in Cs for g in gammas for e in eps]


def _complexity_key(kind, hp):
    # larger k and smaller C are the simpler models
    return -hp.k if kind == "knn" else hp.C


def _rank_key(kind, hp, score):
    return (-score, _complexity_key(kind, hp), tuple(str(v) for v in asdict(hp).values()))


def _score_task(args):
    dataset, kind, hp, folds, training_size, seed, metric = args
    try:
        res = cross_validate(dataset, kind, hp, folds, training_size, seed)
    except (KTooLarge, NonConvergence) as exc:
        log.debug("candidate %s rejected: %s", hp, exc)
        return -math.inf
    value = res.mean(metric)
    if math.isnan(value):
        return -math.inf
    return -value if metric in ("mae", "max", "rmse") else value


def parallel_map(fn, items: Sequence, jobs: int = 1) -> list:
    """Order-preserving map, optionally over a process pool."""
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))
    return [fn(x) for x in items]


def hyperparameter_search(
    dataset: Dataset,
    model_kind: str,
    space: Optional[SearchSpace] = None,
    seed: int = 0,
    folds: int = 10,
    training_size: float = 0.5,
    metric: str = "r2",
    jobs: int = 1,
    history: Optional[list] = None,
):
    """Random search followed by a grid around the random-search winner.

    Every candidate is scored by the mean of ``metric`` over the same
    cross-validation folds. Ties go to the simpler model (larger k /
    smaller C), then to the lexicographically smaller parameter tuple.
    """
    if model_kind not in ("knn", "svr"):
        raise NonSearchable(f"model {model_kind!r} has no hyperparameters to search")
    space = space or SearchSpace()
    rng = np.random.default_rng(seed)

    scored: Dict[object, float] = {}

    def evaluate(cands):
        fresh = [c for c in dict.fromkeys(cands) if c not in scored]
        tasks = [(dataset, model_kind, c, folds, training_size, seed, metric) for c in fresh]
        for c, s in zip(fresh, parallel_map(_score_task, tasks, jobs)):
            scored[c] = s
            if history is not None:
                history.append((c, s))

    def best_of(cands):
        return min(dict.fromkeys(cands), key=lambda c: _rank_key(model_kind, c, scored[c]))

    stage1 = _random_candidates(model_kind, space, rng)
    evaluate(stage1)
    winner = best_of(stage1)
    stage2 = _grid_candidates(model_kind, winner, space)
    evaluate(stage2)
    best = best_of(list(scored))
    if scored[best] == -math.inf:
        raise ModelError(f"no {model_kind} candidate could be evaluated")
    log.info("search %s: best %s (%s=%.4f over %d candidates)", model_kind, best, metric,
             abs(scored[best]), len(scored))
    return best


# -- learning curve ------------------------------------------------------------------


def learning_curve(
    dataset: Dataset,
    model_kind: str,
    hp=None,
    sizes: Sequence[float] = DEFAULT_SIZES,
    folds: int = 10,
    seed: int = 0,
) -> List[CvResult]:
    for s in sizes:
        if not 0 < s < 1:
            raise ConfigError(f"learning-curve sizes must lie in (0, 1), got {s}")
    return [cross_validate(dataset, model_kind, hp, folds, s, seed) for s in sorted(sizes)]


def _num(x: float) -> str:
    return "nan" if math.isnan(x) else f"{x:.6f}"


def learning_curve_rows(curves: Dict[str, List[CvResult]]) -> List[list]:
    header = ["model", "training_size", "mean_train_rows"]
    for m in METRICS:
        header += [f"{m}_mean", f"{m}_std"]
    rows = [header]
    for kind, results in curves.items():
        for r in results:
            row = [kind, f"{r.training_size:g}", f"{np.mean(r.train_sizes):.1f}"]
            for m in METRICS:
                row += [_num(r.mean(m)), _num(r.std(m))]
            rows.append(row)
    return rows


def table1_rows(results: Dict[str, CvResult]) -> List[list]:
    """Models as rows, MAE/MAX/RMSE/EV/R2 means as columns, then the σ."""
    header = ["model"] + [METRIC_LABELS[m] for m in METRICS] + [f"{METRIC_LABELS[m]}_std" for m in METRICS]
    rows = [header]
    for kind, r in results.items():
        rows.append([kind] + [_num(r.mean(m)) for m in METRICS] + [_num(r.std(m)) for m in METRICS])
    return rows


def write_rows(rows: List[list], path: Union[str, Path]) -> None:
    with Path(path).open("w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows)
