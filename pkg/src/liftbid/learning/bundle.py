"""Trained model bundle and its versioned JSON document."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..bidding import PctrModel
from ..domain import N_BINS, bin_index
from .learners import LearnerConfig
from .outcome import (
    DegenerateNormalizer,
    LossMode,
    OutcomePredictor,
    PcvrModel,
    fit_outcome_models,
    fit_pcvr,
    lift_table,
    mean_lift,
)
from .propensity import PropensityModel, clip_propensity, fit_propensity

SCHEMA = "liftbid.model_bundle"
SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ModelBundle:
    mode: LossMode
    outcome: OutcomePredictor
    tau_bar: float
    pcvr: PcvrModel
    pctr: PctrModel
    propensity: PropensityModel | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.tau_bar > 0:
            raise DegenerateNormalizer(f"mean training lift must be positive, got {self.tau_bar!r}")

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "version": SCHEMA_VERSION,
            "mode": self.mode.value,
            "tau_bar": self.tau_bar,
            "propensity": None if self.propensity is None else self.propensity.to_dict(),
            "outcome": self.outcome.to_dict(),
            "pcvr": self.pcvr.to_dict(),
            "pctr": self.pctr.to_dict(),
            "metadata": self.metadata,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    def save(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.dumps())

    @classmethod
    def from_dict(cls, d: dict) -> "ModelBundle":
        if d.get("schema") != SCHEMA or d.get("version") != SCHEMA_VERSION:
            raise ValueError(f"not a {SCHEMA} v{SCHEMA_VERSION} document")
        return cls(
            mode=LossMode(d["mode"]),
            outcome=OutcomePredictor.from_dict(d["outcome"]),
            tau_bar=float(d["tau_bar"]),
            pcvr=PcvrModel.from_dict(d["pcvr"]),
            pctr=PctrModel.from_dict(d["pctr"]),
            propensity=None if d["propensity"] is None else PropensityModel.from_dict(d["propensity"]),
            metadata=d["metadata"],
        )

    @classmethod
    def load(cls, path) -> "ModelBundle":
        return cls.from_dict(json.loads(Path(path).read_text()))


def train_bundle(X, s_final, y, pctr: PctrModel, mode, config: LearnerConfig = LearnerConfig(),
                 seed: int = 0) -> ModelBundle:
    """Propensity (IPS modes), per-bin outcome models, tau-bar and the pCVR normalizer."""
    mode = LossMode(mode)
    X = np.asarray(X, dtype=float)
    bins = bin_index(s_final)
    propensity = None
    if mode is not LossMode.ERM:
        propensity = fit_propensity(X, bins, l2=config.propensity_l2,
                                    min_per_bin=config.min_per_bin, seed=seed)
        if mode is LossMode.IPS_CLIPPED:
            propensity = clip_propensity(propensity, X, config.clip_percentile)
    outcome = fit_outcome_models(X, s_final, y, propensity, mode, config, seed)
    tau_bar = mean_lift(lift_table(outcome.predict(X)))
    pcvr = fit_pcvr(X)
    counts = np.bincount(bins, minlength=N_BINS)
    metadata = {
        "seed": seed,
        "loss_mode": mode.value,
        "n": int(len(bins)),
        "n_per_bin": [int(c) for c in counts],
        "learner": config.kind,
    }
    return ModelBundle(mode, outcome, tau_bar, pcvr, pctr, propensity, metadata)
