"""Per-bin outcome predictors, their training losses, and lift / phi computation."""

from __future__ import annotations

import math
from enum import Enum

import numpy as np

from ..domain import FEATURE_NAMES, N_BINS, bin_gap, bin_index
from .learners import LearnerConfig, learner_from_dict, make_learner
from .propensity import PropensityModel, check_bin_counts, ips_weights


class LossMode(str, Enum):
    ERM = "erm"
    IPS = "ips"
    IPS_CLIPPED = "ips-clipped"


class DegenerateNormalizer(ZeroDivisionError):
    pass


def erm_loss(pred, y) -> float:
    """Mean squared error over one bin's samples."""
    pred, y = np.asarray(pred, dtype=float), np.asarray(y, dtype=float)
    if y.size == 0:
        raise ValueError("empty bin")
    return math.fsum((y - pred) ** 2) / y.size


def ips_loss(pred, y, propensity, n_total: int) -> float:
    """Squared error over one bin, each term divided by its propensity, averaged over ALL n samples."""
    pred, y = np.asarray(pred, dtype=float), np.asarray(y, dtype=float)
    w = ips_weights(propensity, warn_above=np.inf)
    return math.fsum(w * (y - pred) ** 2) / n_total


class OutcomePredictor:
    def __init__(self, models, mode: LossMode):
        if len(models) != N_BINS:
            raise ValueError(f"need {N_BINS} per-bin models")
        self.models = list(models)
        self.mode = LossMode(mode)

    def predict(self, X) -> np.ndarray:
        """(n, 8) matrix of predicted visit counts, clamped at zero."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.maximum(np.column_stack([m.predict(X) for m in self.models]), 0.0)

    def to_dict(self) -> dict:
        return {"mode": self.mode.value, "models": [m.to_dict() for m in self.models]}

    @classmethod
    def from_dict(cls, d: dict) -> "OutcomePredictor":
        return cls([learner_from_dict(m) for m in d["models"]], d["mode"])


def sample_weights(mode: LossMode, X, bins, propensity: PropensityModel | None) -> np.ndarray:
    mode = LossMode(mode)
    if mode is LossMode.ERM:
        return np.ones(len(bins))
    if propensity is None:
        raise ValueError(f"{mode.value} training needs a propensity model")
    if mode is LossMode.IPS_CLIPPED and propensity.clip_thresholds is None:
        raise ValueError("ips-clipped training needs a clipped propensity model")
    if mode is LossMode.IPS and propensity.clip_thresholds is not None:
        raise ValueError("ips training needs an unclipped propensity model")
    e = propensity.predict(X)[np.arange(len(bins)), bins]
    return ips_weights(e)


def fit_outcome_models(X, s_final, y, propensity: PropensityModel | None, mode,
                       config: LearnerConfig = LearnerConfig(), seed: int = 0) -> OutcomePredictor:
    """One weighted regressor per exposure bin; weights 1 (ERM) or 1/e_b(x) (IPS modes)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    bins = bin_index(s_final)
    check_bin_counts(bins, config.min_per_bin)
    w = sample_weights(mode, X, bins, propensity)
    models = []
    for b in range(N_BINS):
        m = bins == b
        models.append(make_learner(config).fit(X[m], y[m], w[m]))
    return OutcomePredictor(models, mode)


def lift_table(F) -> np.ndarray:
    """Amortised per-impression lift at every bin, from an (n, 8) outcome matrix.

    Bin b < 7 gets (f^{b+1} - f^b) / gap(b); the open last bin gets 0.
    """
    F = np.atleast_2d(F)
    tau = np.zeros_like(F, dtype=float)
    gaps = np.array([bin_gap(b) for b in range(N_BINS - 1)], dtype=float)
    tau[:, :-1] = (F[:, 1:] - F[:, :-1]) / gaps
    return tau


def predict_lift(models: OutcomePredictor, x, count) -> np.ndarray | float:
    """Predicted lift of the next impression for users at impression count(s) `count`."""
    X = np.atleast_2d(np.asarray(x, dtype=float))
    tau = lift_table(models.predict(X))
    b = bin_index(np.broadcast_to(count, (len(X),)))
    out = tau[np.arange(len(X)), b]
    return float(out[0]) if np.ndim(x) == 1 and np.ndim(count) == 0 else out


def mean_lift(tau_table) -> float:
    """tau-bar: mean over users and all eight bins."""
    tau_table = np.asarray(tau_table, dtype=float)
    return math.fsum(tau_table.ravel()) / tau_table.size


def normalize_phi(tau_hat, tau_bar: float, floor: bool = False):
    if abs(tau_bar) < 1e-12:
        raise DegenerateNormalizer(f"mean lift {tau_bar!r} is too close to zero")
    phi = np.asarray(tau_hat, dtype=float) / tau_bar
    if floor:
        phi = np.maximum(phi, 0.0)
    return float(phi) if phi.ndim == 0 else phi


class PcvrModel:
    """The production pCVR score carried in the features, normalized by its training-population mean.

    This is what the performance baseline and the logging policy bid on.
    """

    feature = FEATURE_NAMES.index("pcvr")

    def __init__(self, mean_prediction: float):
        self.mean_prediction = float(mean_prediction)

    def predict_raw(self, X) -> np.ndarray:
        return np.asarray(np.atleast_2d(X), dtype=float)[:, self.feature]

    def predict_phi(self, X) -> np.ndarray:
        return normalize_phi(self.predict_raw(X), self.mean_prediction)

    def to_dict(self) -> dict:
        return {"feature": FEATURE_NAMES[self.feature], "mean_prediction": self.mean_prediction}

    @classmethod
    def from_dict(cls, d: dict) -> "PcvrModel":
        if d["feature"] != FEATURE_NAMES[cls.feature]:
            raise ValueError(f"unexpected pCVR feature {d['feature']!r}")
        return cls(d["mean_prediction"])


def fit_pcvr(X) -> PcvrModel:
    """Freeze the normalizer: the mean pCVR score over the training population."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if len(X) == 0:
        raise ValueError("cannot normalize pCVR over an empty population")
    return PcvrModel(math.fsum(X[:, PcvrModel.feature]) / len(X))
