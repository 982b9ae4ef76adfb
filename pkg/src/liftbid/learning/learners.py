"""Regressors that honour per-sample weights.

Any object with ``fit(X, y, sample_weight)``, ``predict(X)``, ``to_dict()``
and a matching ``from_dict`` can back the outcome predictors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LearnerConfig:
    kind: str = "stumps"  # "stumps" or "ridge"
    n_rounds: int = 200
    learning_rate: float = 0.1
    n_bins: int = 64
    min_leaf_weight: float = 1e-6
    min_leaf_fraction: float = 0.3  # leaves must hold this share of the total weight
    ridge_lambda: float = 1.0
    min_per_bin: int = 30
    propensity_l2: float = 1e-3
    clip_percentile: float = 99.9

    def __post_init__(self):
        if self.kind not in ("stumps", "ridge"):
            raise ValueError(f"unknown learner kind {self.kind!r}")
        if self.n_rounds < 0 or self.learning_rate <= 0 or self.n_bins < 2:
            raise ValueError("invalid boosting parameters")
        if not 0 <= self.min_leaf_fraction < 0.5:
            raise ValueError("min_leaf_fraction must lie in [0, 0.5)")
        if not 0 < self.clip_percentile <= 100:
            raise ValueError("clip_percentile must lie in (0, 100]")


def _check_xyw(X, y, sample_weight):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float)
    w = np.ones(len(y)) if sample_weight is None else np.asarray(sample_weight, dtype=float)
    if not (len(X) == len(y) == len(w)):
        raise ValueError("X, y and sample_weight lengths differ")
    if len(y) == 0:
        raise ValueError("cannot fit on an empty dataset")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("sample weights must be finite and non-negative")
    return X, y, w


class StumpBooster:
    """Additive model of depth-1 regression trees fit to weighted squared error.

    Candidate thresholds are feature quantiles, so each round is a handful of
    weighted histograms.
    """

    def __init__(self, n_rounds=200, learning_rate=0.1, n_bins=64, min_leaf_weight=1e-6,
                 min_leaf_fraction=0.0):
        self.n_rounds = n_rounds
        self.learning_rate = learning_rate
        self.n_bins = n_bins
        self.min_leaf_weight = min_leaf_weight
        self.min_leaf_fraction = min_leaf_fraction
        self.init_ = 0.0
        self.stumps_: list[tuple[int, float, float, float]] = []

    def fit(self, X, y, sample_weight=None):
        X, y, w = _check_xyw(X, y, sample_weight)
        w_total = w.sum()
        if w_total <= 0:
            raise ValueError("total sample weight must be positive")
        min_leaf = max(self.min_leaf_weight, self.min_leaf_fraction * w_total)
        qs = np.linspace(0, 1, self.n_bins + 1)[1:-1]
        thresholds, codes = [], []
        for j in range(X.shape[1]):
            thr = np.unique(np.quantile(X[:, j], qs))
            thresholds.append(thr)
            codes.append(np.searchsorted(thr, X[:, j], side="right"))

        self.init_ = float(np.dot(w, y) / w_total)
        self.stumps_ = []
        F = np.full(len(y), self.init_)
        lr = self.learning_rate
        for _ in range(self.n_rounds):
            wr = w * (y - F)
            best = None
            for j, (thr, code) in enumerate(zip(thresholds, codes)):
                if len(thr) == 0:
                    continue
                W = np.bincount(code, weights=w, minlength=len(thr) + 1)
                S = np.bincount(code, weights=wr, minlength=len(thr) + 1)
                WL, SL = np.cumsum(W)[:-1], np.cumsum(S)[:-1]
                WR, SR = w_total - WL, S.sum() - SL
                ok = (WL > min_leaf) & (WR > min_leaf)
                if not ok.any():
                    continue
                with np.errstate(divide="ignore", invalid="ignore"):
                    gain = np.where(ok, SL**2 / WL + SR**2 / WR, -np.inf)
                k = int(np.argmax(gain))
                if best is None or gain[k] > best[0]:
                    best = (gain[k], j, k, SL[k] / WL[k], SR[k] / WR[k])
            if best is None:
                break
            _, j, k, left, right = best
            if abs(left) < 1e-15 and abs(right) < 1e-15:
                break
            vl, vr = lr * left, lr * right
            self.stumps_.append((j, float(thresholds[j][k]), float(vl), float(vr)))
            F += np.where(codes[j] <= k, vl, vr)
        return self

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        out = np.full(len(X), self.init_)
        for j, thr, vl, vr in self.stumps_:
            out += np.where(X[:, j] < thr, vl, vr)
        return out

    def to_dict(self) -> dict:
        return {"kind": "stumps", "init": self.init_, "stumps": [list(s) for s in self.stumps_]}

    @classmethod
    def from_dict(cls, d: dict) -> "StumpBooster":
        m = cls()
        m.init_ = float(d["init"])
        m.stumps_ = [(int(j), float(t), float(a), float(b)) for j, t, a, b in d["stumps"]]
        return m


def _ridge_basis(X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return np.hstack([X, np.log1p(np.abs(X))])


class WeightedRidge:
    """Closed-form weighted ridge on [x, log1p|x|] with an unpenalised intercept."""

    def __init__(self, ridge_lambda=1.0):
        self.ridge_lambda = ridge_lambda
        self.mean_ = None
        self.scale_ = None
        self.coef_ = None
        self.intercept_ = 0.0

    def fit(self, X, y, sample_weight=None):
        X, y, w = _check_xyw(X, y, sample_weight)
        B = _ridge_basis(X)
        self.mean_ = B.mean(axis=0)
        scale = B.std(axis=0)
        self.scale_ = np.where(scale > 0, scale, 1.0)
        Z = (B - self.mean_) / self.scale_
        wn = w / w.sum()
        zbar = wn @ Z
        ybar = float(wn @ y)
        Zc = Z - zbar
        A = Zc.T @ (Zc * wn[:, None]) + (self.ridge_lambda / len(y)) * np.eye(Z.shape[1])
        self.coef_ = np.linalg.solve(A, Zc.T @ (wn * (y - ybar)))
        self.intercept_ = ybar - float(zbar @ self.coef_)
        return self

    def predict(self, X) -> np.ndarray:
        Z = (_ridge_basis(X) - self.mean_) / self.scale_
        return Z @ self.coef_ + self.intercept_

    def to_dict(self) -> dict:
        return {
            "kind": "ridge",
            "ridge_lambda": self.ridge_lambda,
            "mean": self.mean_.tolist(),
            "scale": self.scale_.tolist(),
            "coef": self.coef_.tolist(),
            "intercept": self.intercept_,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WeightedRidge":
        m = cls(d["ridge_lambda"])
        m.mean_ = np.asarray(d["mean"])
        m.scale_ = np.asarray(d["scale"])
        m.coef_ = np.asarray(d["coef"])
        m.intercept_ = float(d["intercept"])
        return m


def make_learner(config: LearnerConfig):
    if config.kind == "stumps":
        return StumpBooster(config.n_rounds, config.learning_rate, config.n_bins, config.min_leaf_weight,
                            config.min_leaf_fraction)
    return WeightedRidge(config.ridge_lambda)


def learner_from_dict(d: dict):
    return {"stumps": StumpBooster, "ridge": WeightedRidge}[d["kind"]].from_dict(d)
