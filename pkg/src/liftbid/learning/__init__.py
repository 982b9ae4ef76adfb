from .learners import LearnerConfig, StumpBooster, WeightedRidge
from .outcome import (
    DegenerateNormalizer,
    LossMode,
    OutcomePredictor,
    PcvrModel,
    erm_loss,
    fit_outcome_models,
    fit_pcvr,
    ips_loss,
    lift_table,
    mean_lift,
    normalize_phi,
    predict_lift,
)
from .propensity import (
    NonPositivePropensity,
    PropensityModel,
    UnderpopulatedBin,
    clip_propensity,
    fit_propensity,
    nearest_rank,
)

__all__ = [
    "DegenerateNormalizer", "LearnerConfig", "LossMode", "NonPositivePropensity",
    "OutcomePredictor", "PcvrModel", "PropensityModel", "StumpBooster",
    "UnderpopulatedBin", "WeightedRidge", "clip_propensity", "erm_loss",
    "fit_outcome_models", "fit_pcvr", "fit_propensity", "ips_loss", "lift_table",
    "mean_lift", "nearest_rank", "normalize_phi", "predict_lift",
]
