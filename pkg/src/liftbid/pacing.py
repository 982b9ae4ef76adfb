"""Hourly budget-pacing controller for the bid multiplier alpha."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class PacingConfig:
    kappa: float = 0.5
    alpha_min: float = 0.001
    alpha_max: float = 1.0
    alpha_init: float = 0.1
    zero_spend_boost: float = 1.25
    cadence_hours: int = 1

    def __post_init__(self):
        if not 0 < self.alpha_min <= self.alpha_max <= 1:
            raise ValueError("need 0 < alpha_min <= alpha_max <= 1")
        if not self.alpha_min <= self.alpha_init <= self.alpha_max:
            raise ValueError("alpha_init outside [alpha_min, alpha_max]")
        if self.kappa <= 0 or self.zero_spend_boost < 1 or self.cadence_hours < 1:
            raise ValueError("invalid pacing parameters")


@dataclass
class PacingState:
    """One arm's pacing state. Spend is in integer micros."""

    budget: int
    horizon_hours: int
    config: PacingConfig = field(default_factory=PacingConfig)
    alpha: float = -1.0
    spend: int = 0
    window_spend: int = 0
    trajectory: list = field(default_factory=list)  # (hour, alpha, window spend)

    def __post_init__(self):
        if self.alpha < 0:
            self.alpha = self.config.alpha_init
        if self.budget < 0 or self.horizon_hours <= 0:
            raise ValueError("budget must be >= 0 and horizon positive")

    @property
    def remaining(self) -> int:
        return max(self.budget - self.spend, 0)

    def record_spend(self, amount: int) -> None:
        self.spend += int(amount)
        self.window_spend += int(amount)


def update_alpha(state: PacingState, hour: int) -> float:
    """Close one cadence window and move alpha toward the target spend rate.

    alpha' = clamp(alpha * (target / actual) ** kappa); a window without spend
    multiplies alpha by the boost instead.
    """
    cfg = state.config
    target_rate = state.budget / state.horizon_hours
    actual_rate = state.window_spend / cfg.cadence_hours
    if actual_rate == 0:
        proposed = state.alpha * cfg.zero_spend_boost
    else:
        proposed = state.alpha * (target_rate / actual_rate) ** cfg.kappa
    state.trajectory.append((hour, state.alpha, state.window_spend))
    state.alpha = min(max(proposed, cfg.alpha_min), cfg.alpha_max)
    state.window_spend = 0
    return state.alpha
