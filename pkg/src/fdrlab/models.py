"""Regression models: linear least squares, inverse-distance k-NN and
epsilon-SVR with an RBF kernel.

All three standardize features (z-score, fitted on the training rows only)
before learning. Predictions are never clamped to [0, 1].
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .dataset import Dataset
from .errors import (
    DimensionMismatch,
    EmptyDataset,
    KTooLarge,
    NonConvergence,
    VersionMismatch,
)

MODEL_FORMAT = "fdrlab-model"
MODEL_VERSION = 1
MODEL_KINDS = ("ols", "knn", "svr")


@dataclass(frozen=True)
class KnnParams:
    k: int = 3
    metric: str = "manhattan"

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"k must be a positive integer, got {self.k}")
        if self.metric not in ("manhattan", "euclidean"):
            raise ValueError(f"unknown metric {self.metric!r}")


@dataclass(frozen=True)
class SvrParams:
    C: float = 3.5
    gamma: float = 0.055
    epsilon: float = 0.025

    def __post_init__(self):
        if not self.C > 0 or not self.gamma > 0 or not self.epsilon >= 0:
            raise ValueError(f"invalid SVR hyperparameters {self}")


@dataclass(frozen=True)
class OlsParams:
    pass


def default_params(kind: str):
    return {"ols": OlsParams, "knn": KnnParams, "svr": SvrParams}[kind]()


def params_from_dict(kind: str, d: Optional[dict]):
    cls = {"ols": OlsParams, "knn": KnnParams, "svr": SvrParams}[kind]
    return cls(**(d or {}))


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray  # 0 marks a zero-variance column

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        X = np.asarray(X, dtype=float)
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        std = np.where(std <= 1e-12 * np.maximum(1.0, np.abs(mean)), 0.0, std)
        return cls(mean, std)

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        safe = np.where(self.scale == 0, 1.0, self.scale)
        return np.where(self.scale == 0, 0.0, (X - self.mean) / safe)

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Standardizer":
        return cls(np.array(d["mean"], dtype=float), np.array(d["scale"], dtype=float))


def _check_train(train: Dataset) -> Dataset:
    if len(train) == 0:
        raise EmptyDataset("cannot fit on an empty dataset")
    return train.sorted()


@dataclass(frozen=True, eq=False)
class TrainedModel:
    kind: str
    standardizer: Standardizer
    feature_names: tuple
    hyperparameters: object = field(default_factory=OlsParams)

    @property
    def n_features(self) -> int:
        return len(self.standardizer.mean)

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.n_features:
            raise DimensionMismatch(f"model expects {self.n_features} features, got {X.shape[1]}")
        out = self._predict(self.standardizer.transform(X))
        return out[0] if single else out

    def _predict(self, Z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _params(self) -> dict:
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "kind": self.kind,
            "feature_names": list(self.feature_names),
            "hyperparameters": asdict(self.hyperparameters),
            "standardizer": self.standardizer.to_dict(),
            "parameters": self._params(),
        }


# -- linear least squares -------------------------------------------------


@dataclass(frozen=True, eq=False)
class OlsModel(TrainedModel):
    weights: np.ndarray = None  # in standardized feature space
    intercept: float = 0.0

    def _predict(self, Z):
        return Z @ self.weights + self.intercept

    @property
    def coef_(self) -> np.ndarray:
        """Slopes in the original (unstandardized) feature units."""
        safe = np.where(self.standardizer.scale == 0, 1.0, self.standardizer.scale)
        return np.where(self.standardizer.scale == 0, 0.0, self.weights / safe)

    @property
    def intercept_(self) -> float:
        return float(self.intercept - self.coef_ @ self.standardizer.mean)

    def _params(self):
        return {"weights": self.weights.tolist(), "intercept": self.intercept}


def fit_ols(train: Dataset, hp: Optional[OlsParams] = None) -> OlsModel:
    """Least-squares fit with intercept; minimum-norm weights when the
    design matrix is rank deficient."""
    train = _check_train(train)
    std = Standardizer.fit(train.X)
    Z = std.transform(train.X)
    y_mean = float(train.y.mean())
    # columns of Z are centred, so the intercept decouples from the weights
    w, *_ = np.linalg.lstsq(Z, train.y - y_mean, rcond=None)
    return OlsModel("ols", std, train.feature_names, OlsParams(), weights=w, intercept=y_mean)


# -- k nearest neighbours ---------------------------------------------------


def pairwise_distances(A: np.ndarray, B: np.ndarray, metric: str) -> np.ndarray:
    diff = A[:, None, :] - B[None, :, :]
    if metric == "manhattan":
        return np.abs(diff).sum(axis=2)
    return np.sqrt((diff * diff).sum(axis=2))


@dataclass(frozen=True, eq=False)
class KnnModel(TrainedModel):
    Z_train: np.ndarray = None
    y_train: np.ndarray = None

    def _predict(self, Z):
        k, metric = self.hyperparameters.k, self.hyperparameters.metric
        out = np.empty(len(Z))
        for start in range(0, len(Z), 256):
            D = pairwise_distances(Z[start:start + 256], self.Z_train, metric)
            for r, d in enumerate(D):
                zero = d == 0
                if zero.any():
                    out[start + r] = self.y_train[zero].mean()
                    continue
                # every neighbour tied with the k-th one takes part
                kth = np.partition(d, k - 1)[k - 1]
                near = d <= kth
                w = 1.0 / d[near]
                out[start + r] = (w * self.y_train[near]).sum() / w.sum()
        return out

    def _params(self):
        return {"train_features": self.Z_train.tolist(), "train_targets": self.y_train.tolist()}


def fit_knn(train: Dataset, hp: Optional[KnnParams] = None) -> KnnModel:
    hp = hp or KnnParams()
    train = _check_train(train)
    if hp.k > len(train):
        raise KTooLarge(f"k={hp.k} exceeds the {len(train)} training rows")
    std = Standardizer.fit(train.X)
    return KnnModel("knn", std, train.feature_names, hp,
                    Z_train=std.transform(train.X), y_train=train.y.copy())


# -- epsilon-SVR --------------------------------------------------------------


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2 * A @ B.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


@dataclass(frozen=True, eq=False)
class SvrModel(TrainedModel):
    support_vectors: np.ndarray = None  # standardized
    dual_coef: np.ndarray = None  # alpha - alpha*, one per support vector
    bias: float = 0.0
    iterations: int = 0
    kkt_violation: float = 0.0

    def _predict(self, Z):
        if len(self.dual_coef) == 0:
            return np.full(len(Z), self.bias)
        return rbf_kernel(Z, self.support_vectors, self.hyperparameters.gamma) @ self.dual_coef + self.bias

    def _params(self):
        return {
            "support_vectors": self.support_vectors.tolist(),
            "dual_coef": self.dual_coef.tolist(),
            "bias": self.bias,
            "iterations": self.iterations,
            "kkt_violation": self.kkt_violation,
        }


SVR_TOLERANCE = 1e-3
SVR_MAX_ITER = 10**6
_TAU = 1e-12


def solve_svr_dual(K: np.ndarray, y: np.ndarray, C: float, epsilon: float,
                   tol: float = SVR_TOLERANCE, max_iter: int = SVR_MAX_ITER):
    """Pairwise (SMO) ascent on the epsilon-SVR dual.

    The 2l variables are ``alpha`` (sign +1) followed by ``alpha*`` (sign -1).
    Working pairs follow the maximal-violating-pair rule with second-order
    selection of the partner. Stops when the violation gap drops to ``tol``.

    Returns ``(beta, bias, iterations, gap)`` with ``beta = alpha - alpha*``.
    """
    l = len(y)
    sign = np.r_[np.ones(l), -np.ones(l)]
    p = np.r_[epsilon - y, epsilon + y]
    a = np.zeros(2 * l)
    G = p.copy()
    Kd = np.diag(K).copy()
    rows = np.r_[np.arange(l), np.arange(l)]
    K2 = K[rows]  # (2l, l): row t is K[t mod l]

    def select():
        myg = -sign * G
        up = ((sign > 0) & (a < C)) | ((sign < 0) & (a > 0))
        low = ((sign > 0) & (a > 0)) | ((sign < 0) & (a < C))
        if not up.any() or not low.any():
            return -1, -1, 0.0
        i = int(np.flatnonzero(up)[np.argmax(myg[up])])
        gmax = myg[i]
        gap = gmax - myg[low].min()
        if gap <= tol:
            return -1, -1, gap
        cand = low & (myg < gmax)
        b = gmax - myg[cand]
        quad = Kd[i % l] + Kd[rows[cand]] - 2 * K2[cand, i % l]
        quad = np.where(quad > 0, quad, _TAU)
        j = int(np.flatnonzero(cand)[np.argmin(-(b * b) / quad)])
        return i, j, gap

    it = 0
    gap = np.inf
    while True:
        i, j, gap = select()
        if i < 0:
            # confirm against a freshly computed gradient before stopping
            beta = a[:l] - a[l:]
            G = sign * (K2 @ beta) + p
            i, j, gap = select()
            if i < 0:
                break
        if it >= max_iter:
            raise NonConvergence(it, gap)
        it += 1
        Qij = sign[i] * sign[j] * K[i % l, j % l]
        ai, aj = a[i], a[j]
        if sign[i] != sign[j]:
            quad = Kd[i % l] + Kd[j % l] + 2 * Qij
            quad = quad if quad > 0 else _TAU
            delta = (-G[i] - G[j]) / quad
            diff = ai - aj
            a[i] += delta
            a[j] += delta
            if diff > 0:
                if a[j] < 0:
                    a[j], a[i] = 0.0, diff
            elif a[i] < 0:
                a[i], a[j] = 0.0, -diff
            if diff > 0:
                if a[i] > C:
                    a[i], a[j] = C, C - diff
            elif a[j] > C:
                a[j], a[i] = C, C + diff
        else:
            quad = Kd[i % l] + Kd[j % l] - 2 * Qij
            quad = quad if quad > 0 else _TAU
            delta = (G[i] - G[j]) / quad
            total = ai + aj
            a[i] -= delta
            a[j] += delta
            if total > C:
                if a[i] > C:
                    a[i], a[j] = C, total - C
            elif a[j] < 0:
                a[j], a[i] = 0.0, total
            if total > C:
                if a[j] > C:
                    a[j], a[i] = C, total - C
            elif a[i] < 0:
                a[i], a[j] = 0.0, total
        di, dj = a[i] - ai, a[j] - aj
        G += sign * (sign[i] * di * K2[:, i % l] + sign[j] * dj * K2[:, j % l])

    beta = a[:l] - a[l:]
    # bias: average over free variables, else midpoint of the feasible interval
    myg = -sign * G
    free = (a > 0) & (a < C)
    if free.any():
        bias = float(myg[free].mean())
    else:
        up = ((sign > 0) & (a < C)) | ((sign < 0) & (a > 0))
        low = ((sign > 0) & (a > 0)) | ((sign < 0) & (a < C))
        hi = myg[low].min() if low.any() else myg[up].max()
        lo = myg[up].max() if up.any() else hi
        bias = float((hi + lo) / 2)
    return beta, bias, it, float(gap)


def fit_svr(train: Dataset, hp: Optional[SvrParams] = None,
            tol: float = SVR_TOLERANCE, max_iter: int = SVR_MAX_ITER) -> SvrModel:
    hp = hp or SvrParams()
    train = _check_train(train)
    std = Standardizer.fit(train.X)
    Z = std.transform(train.X)
    K = rbf_kernel(Z, Z, hp.gamma)
    beta, bias, it, gap = solve_svr_dual(K, train.y, hp.C, hp.epsilon, tol, max_iter)
    sv = beta != 0
    return SvrModel("svr", std, train.feature_names, hp, support_vectors=Z[sv],
                    dual_coef=beta[sv], bias=bias, iterations=it, kkt_violation=gap)


# -- common entry points ------------------------------------------------------

FITTERS = {"ols": fit_ols, "knn": fit_knn, "svr": fit_svr}


def fit(kind: str, train: Dataset, hp=None) -> TrainedModel:
    if kind not in FITTERS:
        raise ValueError(f"unknown model kind {kind!r}; choose from {MODEL_KINDS}")
    return FITTERS[kind](train, hp)


def predict(model: TrainedModel, features) -> Union[float, np.ndarray]:
    return model.predict(features)


def model_from_dict(doc: dict) -> TrainedModel:
    if doc.get("format") != MODEL_FORMAT or doc.get("version") != MODEL_VERSION:
        raise VersionMismatch(
            f"unsupported model document {doc.get('format')!r} v{doc.get('version')!r}; "
            f"expected {MODEL_FORMAT} v{MODEL_VERSION}"
        )
    kind = doc["kind"]
    std = Standardizer.from_dict(doc["standardizer"])
    hp = params_from_dict(kind, doc.get("hyperparameters"))
    names = tuple(doc["feature_names"])
    p = doc["parameters"]
    if kind == "ols":
        return OlsModel(kind, std, names, hp, weights=np.array(p["weights"], dtype=float),
                        intercept=float(p["intercept"]))
    if kind == "knn":
        return KnnModel(kind, std, names, hp,
                        Z_train=np.array(p["train_features"], dtype=float).reshape(-1, len(names)),
                        y_train=np.array(p["train_targets"], dtype=float))
    if kind == "svr":
        return SvrModel(kind, std, names, hp,
                        support_vectors=np.array(p["support_vectors"], dtype=float).reshape(-1, len(names)),
                        dual_coef=np.array(p["dual_coef"], dtype=float), bias=float(p["bias"]),
                        iterations=int(p.get("iterations", 0)),
                        kkt_violation=float(p.get("kkt_violation", 0.0)))
    raise VersionMismatch(f"unknown model kind {kind!r}")


def save_model(model: TrainedModel, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), indent=1) + "\n")


def load_model(path: Union[str, Path]) -> TrainedModel:
    return model_from_dict(json.loads(Path(path).read_text()))
