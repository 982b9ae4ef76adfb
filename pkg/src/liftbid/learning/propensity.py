"""Multinomial propensity model over exposure bins, with top clipping."""

from __future__ import annotations

import logging
import math
from fractions import Fraction

import numpy as np
from scipy.optimize import minimize
from scipy.special import log_softmax, softmax

from ..domain import N_BINS

log = logging.getLogger(__name__)

Z_CLIP = 4.0  # standardized basis values are winsorized to bound outlier leverage


class UnderpopulatedBin(ValueError):
    def __init__(self, b: int, count: int, required: int):
        super().__init__(f"exposure bin {b} has {count} samples, need at least {required}")
        self.bin = b
        self.count = count


class NonPositivePropensity(ValueError):
    pass


def check_bin_counts(bins, min_per_bin: int, n_classes: int = N_BINS) -> np.ndarray:
    counts = np.bincount(np.asarray(bins, dtype=np.int64), minlength=n_classes)
    for b, c in enumerate(counts):
        if c < min_per_bin:
            raise UnderpopulatedBin(b, int(c), min_per_bin)
    return counts


def _basis(X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    A = np.abs(X)
    return np.hstack([X, np.log1p(A), np.log(A + 1e-3)])


def nearest_rank(values, percentile: float) -> float:
    """Nearest-rank percentile: the ceil(P/100 * N)-th smallest value."""
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        raise ValueError("percentile of an empty sample")
    rank = math.ceil(Fraction(str(percentile)) * v.size / 100)
    return float(v[max(rank, 1) - 1])


class PropensityModel:
    """x -> (e_0(x), ..., e_7(x)), optionally capped per bin at `clip_thresholds`."""

    def __init__(self, mean, scale, coef, intercept, clip_thresholds=None):
        self.mean = np.asarray(mean, dtype=float)
        self.scale = np.asarray(scale, dtype=float)
        self.coef = np.asarray(coef, dtype=float)
        self.intercept = np.asarray(intercept, dtype=float)
        self.clip_thresholds = None if clip_thresholds is None else np.asarray(clip_thresholds, dtype=float)

    @property
    def n_classes(self) -> int:
        return len(self.intercept)

    def predict_raw(self, X) -> np.ndarray:
        Z = np.clip((_basis(X) - self.mean) / self.scale, -Z_CLIP, Z_CLIP)
        return softmax(Z @ self.coef + self.intercept, axis=1)

    def predict(self, X) -> np.ndarray:
        e = self.predict_raw(X)
        if self.clip_thresholds is not None:
            e = np.minimum(e, self.clip_thresholds)
        return e

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "scale": self.scale.tolist(),
            "coef": self.coef.tolist(),
            "intercept": self.intercept.tolist(),
            "clip_thresholds": None if self.clip_thresholds is None else self.clip_thresholds.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PropensityModel":
        return cls(d["mean"], d["scale"], d["coef"], d["intercept"], d["clip_thresholds"])


def fit_propensity(X, bins, l2: float = 1e-3, min_per_bin: int = 30,
                   n_classes: int = N_BINS, seed: int = 0) -> PropensityModel:
    """L2-regularised multinomial logistic regression on standardized [x, log1p|x|, log(|x| + 1e-3)].

    Training is a deterministic convex solve; `seed` is accepted for interface
    symmetry and recorded by callers.
    """
    bins = np.asarray(bins, dtype=np.int64)
    check_bin_counts(bins, min_per_bin, n_classes)
    B = _basis(X)
    mean = B.mean(axis=0)
    scale = B.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    Z = np.clip((B - mean) / scale, -Z_CLIP, Z_CLIP)
    n, d = Z.shape
    K = n_classes
    Y = np.zeros((n, K))
    Y[np.arange(n), bins] = 1.0
    Z1 = np.hstack([Z, np.ones((n, 1))])

    def objective(theta):
        W = theta.reshape(d + 1, K)
        logits = Z1 @ W
        lp = log_softmax(logits, axis=1)
        loss = -np.sum(Y * lp) / n + 0.5 * l2 * np.sum(W[:-1] ** 2)
        G = Z1.T @ (np.exp(lp) - Y) / n
        G[:-1] += l2 * W[:-1]
        return loss, G.ravel()

    res = minimize(objective, np.zeros((d + 1) * K), jac=True, method="L-BFGS-B",
                   options={"maxiter": 2000, "gtol": 1e-9, "ftol": 1e-14})
    W = res.x.reshape(d + 1, K)
    return PropensityModel(mean, scale, W[:-1], W[-1])


def clip_propensity(model: PropensityModel, X_train, percentile: float = 99.9) -> PropensityModel:
    """Cap each bin's score at the nearest-rank `percentile` of its training scores.

    Only large propensities are capped; small ones (large weights) are left alone.
    """
    raw = model.predict_raw(X_train)
    thresholds = np.array([nearest_rank(raw[:, b], percentile) for b in range(raw.shape[1])])
    clipped = PropensityModel(model.mean, model.scale, model.coef, model.intercept, thresholds)
    changed = (raw > thresholds).sum(axis=0)
    log.info("propensity clip thresholds %s; scores capped per bin %s",
             np.round(thresholds, 6).tolist(), changed.tolist())
    return clipped


def ips_weights(propensity_of_own_bin, warn_above: float = 1e4) -> np.ndarray:
    e = np.asarray(propensity_of_own_bin, dtype=float)
    if np.any(e <= 0) or np.any(np.isnan(e)):
        raise NonPositivePropensity("propensity scores must be strictly positive")
    w = 1.0 / e
    big = int((w > warn_above).sum())
    if big:
        log.warning("%d IPS weights exceed %g (max %.3g)", big, warn_above, w.max())
    return w
