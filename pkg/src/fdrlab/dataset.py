"""Labelled datasets, CSV I/O and FDR-stratified sampling helpers."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np

from .errors import ColumnMismatch, ConfigError, EmptyDataset, TooFewSamples
from .features import FEATURE_NAMES, FeatureVector

STRATA_BINS = 5


@dataclass(frozen=True, eq=False)
class Dataset:
    """Rows of (flip-flop name, feature vector, measured FDR)."""

    names: Tuple[str, ...]
    X: np.ndarray
    y: np.ndarray
    feature_names: Tuple[str, ...] = FEATURE_NAMES

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1) if len(self.feature_names) == 1 else X.reshape(len(y), -1)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "names", tuple(self.names))
        if X.shape[0] != y.shape[0] or len(self.names) != y.shape[0]:
            raise ValueError("names, X and y must have the same number of rows")
        if X.shape[1] != len(self.feature_names):
            raise ValueError("feature_names does not match the column count of X")
        if not np.all(np.isfinite(X)) or not np.all(np.isfinite(y)):
            raise ValueError("dataset contains missing or non-finite values")

    def __len__(self) -> int:
        return len(self.names)

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=int)
        return Dataset(tuple(self.names[i] for i in idx), self.X[idx], self.y[idx], self.feature_names)

    def sorted(self) -> "Dataset":
        return self.subset(np.argsort(np.array(self.names, dtype=object), kind="stable"))

    @classmethod
    def from_arrays(cls, X, y, names=None, feature_names=None) -> "Dataset":
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if names is None:
            names = [f"row{i:05d}" for i in range(len(X))]
        if feature_names is None:
            feature_names = FEATURE_NAMES if X.shape[1] == len(FEATURE_NAMES) else tuple(
                f"x{i}" for i in range(X.shape[1]))
        return cls(tuple(names), X, np.asarray(y, dtype=float), tuple(feature_names))


def join(features: Dict[str, Union[FeatureVector, Sequence[float]]], fdr: Dict[str, float]) -> Dataset:
    """Join feature rows with FDR labels by flip-flop name (sorted)."""
    missing = sorted(set(fdr) - set(features))
    if missing:
        raise ColumnMismatch(f"no features for flip-flops: {', '.join(missing[:5])}")
    names = sorted(fdr)
    if not names:
        raise EmptyDataset("no labelled flip-flops")
    rows = []
    for n in names:
        v = features[n]
        rows.append(v.values() if isinstance(v, FeatureVector) else list(v))
    return Dataset(tuple(names), np.array(rows, dtype=float), np.array([fdr[n] for n in names]))


# -- CSV ------------------------------------------------------------------


def read_features(path: Union[str, Path]) -> Dict[str, List[float]]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"features file not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None) or []
        if not header or header[0] != "ff_name":
            raise ColumnMismatch(f"{path}: first column must be ff_name")
        missing = [c for c in FEATURE_NAMES if c not in header[1:]]
        if missing:
            raise ColumnMismatch(f"{path}: missing feature column(s): {', '.join(missing)}")
        extra = [c for c in header[1:] if c not in FEATURE_NAMES]
        if extra:
            raise ColumnMismatch(f"{path}: unexpected column(s): {', '.join(extra)}")
        cols = [header.index(c) for c in FEATURE_NAMES]
        return {row[0]: [float(row[c]) for c in cols] for row in reader if row}


def write_fdr(records, path: Union[str, Path]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["ff_name", "injections", "failures", "fdr"])
        for r in sorted(records, key=lambda r: r.ff_name):
            w.writerow([r.ff_name, r.injections, r.failures, repr(r.fdr)])


def read_fdr(path: Union[str, Path]) -> Dict[str, float]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"FDR file not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"ff_name", "fdr"} <= set(reader.fieldnames):
            raise ColumnMismatch(f"{path}: needs ff_name and fdr columns")
        return {row["ff_name"]: float(row["fdr"]) for row in reader}


def load_dataset(features_path, fdr_path) -> Dataset:
    return join(read_features(features_path), read_fdr(fdr_path))


# -- stratification ---------------------------------------------------------


def quantile_strata(y: np.ndarray, bins: int = STRATA_BINS, min_size: int = 1) -> np.ndarray:
    """Label each target with a quantile bin; bins smaller than ``min_size``
    are merged into their smaller neighbour. Returns labels 0..m-1."""
    y = np.asarray(y, dtype=float)
    if len(y) == 0:
        return np.zeros(0, dtype=int)
    edges = np.unique(np.quantile(y, np.linspace(0, 1, bins + 1))[1:-1])
    labels = np.searchsorted(edges, y, side="right")
    groups = [np.flatnonzero(labels == b) for b in np.unique(labels)]
    while len(groups) > 1:
        sizes = [len(g) for g in groups]
        small = int(np.argmin(sizes))
        if sizes[small] >= min_size:
            break
        if small == 0:
            other = 1
        elif small == len(groups) - 1:
            other = small - 1
        else:
            other = small - 1 if sizes[small - 1] <= sizes[small + 1] else small + 1
        lo, hi = sorted((small, other))
        groups[lo:hi + 1] = [np.sort(np.concatenate([groups[lo], groups[hi]]))]
    out = np.empty(len(y), dtype=int)
    for b, g in enumerate(groups):
        out[g] = b
    return out


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def largest_remainder(counts: Sequence[int], total: int) -> List[int]:
    """Integer quotas proportional to ``counts`` that sum to ``total``."""
    n = sum(counts)
    ideal = [c * total / n for c in counts]
    quota = [min(c, math.floor(q)) for c, q in zip(counts, ideal)]
    order = sorted(range(len(counts)), key=lambda i: (-(ideal[i] - quota[i]), i))
    short = total - sum(quota)
    for i in order:
        if short == 0:
            break
        if quota[i] < counts[i]:
            quota[i] += 1
            short -= 1
    return quota


def stratified_subsample(y: np.ndarray, size: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Pick ``size`` indices preserving the FDR strata; returns (chosen, rest)."""
    y = np.asarray(y, dtype=float)
    strata = quantile_strata(y, STRATA_BINS, min_size=2)
    members = [np.flatnonzero(strata == s) for s in range(strata.max() + 1)] if len(y) else []
    quotas = largest_remainder([len(m) for m in members], size)
    chosen = []
    for m, q in zip(members, quotas):
        chosen.append(rng.permutation(m)[:q])
    chosen = np.sort(np.concatenate(chosen)) if chosen else np.zeros(0, dtype=int)
    rest = np.setdiff1d(np.arange(len(y)), chosen)
    return chosen, rest


def stratified_split(y: np.ndarray, training_size: float, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    n = len(y)
    if not 0 < training_size < 1:
        raise ConfigError(f"training size must lie in (0, 1), got {training_size}")
    n_train = round_half_up(training_size * n)
    if n_train == 0 or n_train == n:
        raise TooFewSamples(f"training size {training_size} leaves an empty split of {n} rows")
    return stratified_subsample(y, n_train, np.random.default_rng(seed))
