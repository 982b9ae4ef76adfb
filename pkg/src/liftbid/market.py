"""Synthetic marketplace: population, competitor landscape, clicks and store visits."""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np
from scipy.special import expit

from .domain import (
    ARMS,
    BIN_LOWER,
    FEATURE_NAMES,
    N_BINS,
    Mechanism,
    OutcomeParams,
    UserProfile,
    VisitLabel,
    to_micros,
)


@dataclass(frozen=True)
class MarketConfig:
    population: int = 50_000
    # daily bid requests per user ~ Gamma(shape, mean / shape)
    requests_per_day_mean: float = 4.0
    requests_per_day_shape: float = 2.0
    # highest competing bid is log-normal, in micros
    competitor_median: float = 1500.0
    competitor_sigma: float = 1.0
    confounding: float = 0.5
    second_price_fraction: float = 0.1
    n_slots: int = 100
    slot_ctr_a: float = 2.0
    slot_ctr_b: float = 198.0
    slot_history_impressions: int = 5_000
    # visit model coefficients
    beta0_mean: float = -1.5
    beta0_sd: float = 1.0
    beta1_max: float = 2.0
    # beta1 = beta1_max * sigmoid(beta1_slope * (responsiveness - beta1_offset))
    beta1_slope: float = 3.0
    beta1_offset: float = 1.0
    beta2_base: float = 0.03
    beta2_ratio: float = 0.2  # fatigue per unit of wear-in
    frequency_log_mean: float = 0.5
    distance_median_km: float = 5.0
    distance_sigma: float = 0.8
    pcvr_noise: float = 0.3

    def __post_init__(self):
        if not 0.0 <= self.second_price_fraction <= 1.0:
            raise ValueError("second_price_fraction must lie in [0, 1]")
        if not 0.0 <= self.confounding <= 1.0:
            raise ValueError("confounding must lie in [0, 1]")
        for name in ("competitor_median", "competitor_sigma", "requests_per_day_mean",
                     "requests_per_day_shape", "slot_ctr_a", "slot_ctr_b",
                     "distance_median_km", "distance_sigma", "beta0_sd", "beta1_slope"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.population <= 0:
            raise ValueError("population size must be positive")

    @classmethod
    def field_names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))


sigmoid = expit


@dataclass(frozen=True)
class Population:
    """Columnar population. Bidders only ever receive `user_id` and `features`."""

    user_id: np.ndarray
    features: np.ndarray
    arm: np.ndarray  # index into ARMS
    request_rate: np.ndarray  # expected bid requests per day
    competition: np.ndarray  # standardized competitor shift score
    beta0: np.ndarray
    beta1: np.ndarray
    beta2: np.ndarray

    def __len__(self) -> int:
        return len(self.user_id)

    def arm_members(self, arm: str) -> np.ndarray:
        return np.flatnonzero(self.arm == ARMS.index(arm))

    def profile(self, i: int) -> UserProfile:
        return UserProfile(
            user_id=int(self.user_id[i]),
            features=tuple(float(v) for v in self.features[i]),
            arm=ARMS[self.arm[i]],
            truth=OutcomeParams(float(self.beta0[i]), float(self.beta1[i]), float(self.beta2[i])),
        )

    def visit_prob(self, s, idx=None) -> np.ndarray:
        """Daily visit probability of users `idx` at exposure count(s) `s`."""
        sl = slice(None) if idx is None else idx
        s = np.asarray(s, dtype=float)
        b0, b1, b2 = self.beta0[sl], self.beta1[sl], self.beta2[sl]
        if s.ndim == 2:
            b0, b1, b2 = b0[:, None], b1[:, None], b2[:, None]
        return np.clip(sigmoid(b0 + b1 * np.log1p(s) - b2 * s), 0.0, 1.0)

    def true_lift(self, s, days: int, idx=None) -> np.ndarray:
        """Exact lift of the s-th impression over a campaign of `days` days."""
        s = np.asarray(s)
        return days * (self.visit_prob(s, idx) - self.visit_prob(np.maximum(s - 1, 0), idx))

    def true_lift_table(self, days: int, idx=None) -> np.ndarray:
        """(n, 8) exact per-impression lift between consecutive bin lower edges; 0 in the last bin.

        The ground-truth counterpart of the amortized lift predicted from per-bin models.
        """
        n = len(self.beta0) if idx is None else len(np.atleast_1d(self.beta0[idx]))
        lower = np.asarray(BIN_LOWER, dtype=float)
        v = days * self.visit_prob(np.broadcast_to(lower, (n, N_BINS)), idx)
        tau = np.zeros_like(v)
        tau[:, :-1] = (v[:, 1:] - v[:, :-1]) / np.diff(lower)
        return tau


def generate_population(config: MarketConfig, rng: np.random.Generator) -> Population:
    n = config.population
    if n <= 0:
        raise ValueError("population size must be positive")
    organic = rng.standard_normal(n)
    respond = rng.standard_normal(n)
    z_dist = rng.standard_normal(n)

    frequency = rng.poisson(np.exp(config.frequency_log_mean + 0.8 * organic)).astype(float)
    distance = config.distance_median_km * np.exp(config.distance_sigma * z_dist)

    beta0 = config.beta0_mean + config.beta0_sd * organic
    # nearby, low-organic users respond to ads, and tire of them after a few
    responsiveness = -0.9 * organic - 0.9 * z_dist + 0.5 * respond
    beta1 = config.beta1_max * sigmoid(config.beta1_slope * (responsiveness - config.beta1_offset))
    beta2 = config.beta2_base + config.beta2_ratio * beta1

    shape = config.requests_per_day_shape
    rate = rng.gamma(shape, config.requests_per_day_mean / shape, n)
    prior_impressions = rng.poisson(2.0 * rate).astype(float)
    pcvr = sigmoid(beta0 + config.pcvr_noise * rng.standard_normal(n))

    features = np.column_stack([frequency, distance, prior_impressions, pcvr])
    assert features.shape[1] == len(FEATURE_NAMES)

    # rival performance bidders chase the same likely visitors as a pCVR model
    score = np.log(pcvr) + 0.5 * np.log1p(frequency)
    competition = (score - score.mean()) / score.std() if n > 1 else np.zeros(n)

    arm = np.empty(n, dtype=np.int64)
    arm[rng.permutation(n)] = np.arange(n) % len(ARMS)

    return Population(
        user_id=np.arange(n, dtype=np.int64),
        features=features,
        arm=arm,
        request_rate=rate,
        competition=competition,
        beta0=beta0,
        beta1=beta1,
        beta2=beta2,
    )


def true_visit_prob(user: UserProfile, s) -> float:
    """Daily visit probability of `user` after `s` impressions."""
    if np.any(np.asarray(s) < 0):
        raise ValueError("exposure count must be non-negative")
    t = user.truth
    return np.clip(sigmoid(t.beta0 + t.beta1 * np.log1p(s) - t.beta2 * s), 0.0, 1.0)


@dataclass(frozen=True)
class AuctionOutcome:
    won: bool
    mechanism: Mechanism
    price_paid: int
    clearing_price: int | None
    highest_competing_bid: int


@dataclass(frozen=True)
class AuctionBatch:
    """Vectorised auction resolutions, aligned with the submitted bids."""

    won: np.ndarray
    second_price: np.ndarray
    price_paid: np.ndarray
    competing: np.ndarray

    @property
    def clearing_price(self) -> np.ndarray:
        """Clearing price on second-price wins, -1 elsewhere."""
        return np.where(self.won & self.second_price, self.competing, -1)


def draw_competing_bids(config: MarketConfig, competition, rng: np.random.Generator) -> np.ndarray:
    competition = np.asarray(competition, dtype=float)
    rho = config.confounding
    z = rng.standard_normal(competition.shape)
    log_bid = np.log(config.competitor_median) + config.competitor_sigma * (
        np.sqrt(1.0 - rho**2) * z + rho * competition
    )
    return np.maximum(to_micros(np.exp(log_bid)), 1)


def resolve(bids, competing, second_price) -> AuctionBatch:
    """Apply the price rules: ties lose, first price pays the bid, second price the competitor."""
    bids = np.asarray(bids, dtype=np.int64)
    competing = np.asarray(competing, dtype=np.int64)
    second_price = np.asarray(second_price, dtype=bool)
    won = bids > competing
    price = np.where(won, np.where(second_price, competing, bids), 0)
    return AuctionBatch(won=won, second_price=second_price, price_paid=price, competing=competing)


def run_auctions(bids, config: MarketConfig, rng: np.random.Generator, competition=None) -> AuctionBatch:
    bids = np.asarray(bids, dtype=np.int64)
    if bids.size and bids.min() < 0:
        raise ValueError("bids must be non-negative")
    if competition is None:
        competition = np.zeros(bids.shape)
    competing = draw_competing_bids(config, competition, rng)
    second = rng.random(bids.shape) < config.second_price_fraction
    return resolve(bids, competing, second)


def run_auction(own_bid: int, config: MarketConfig, rng: np.random.Generator,
                competition: float = 0.0) -> AuctionOutcome:
    batch = run_auctions(np.array([own_bid]), config, rng, np.array([competition]))
    won = bool(batch.won[0])
    second = bool(batch.second_price[0])
    return AuctionOutcome(
        won=won,
        mechanism=Mechanism.SECOND_PRICE if second else Mechanism.FIRST_PRICE,
        price_paid=int(batch.price_paid[0]),
        clearing_price=int(batch.competing[0]) if (won and second) else None,
        highest_competing_bid=int(batch.competing[0]),
    )


def realize_click(true_slot_ctr, rng: np.random.Generator):
    """Bernoulli click draw(s); scalar in, bool out, array in, array out."""
    p = np.asarray(true_slot_ctr, dtype=float)
    if np.any((p < 0) | (p > 1)) or np.any(np.isnan(p)):
        raise ValueError("click probability must lie in [0, 1]")
    out = rng.random(p.shape) < p
    return bool(out) if out.ndim == 0 else out


def realize_visit_counts(pop: Population, idx, daily_counts, rng: np.random.Generator) -> np.ndarray:
    """Visits per user, each day counted at most once.

    `daily_counts[k, d]` is the exposure count in effect for user `idx[k]` on day `d`.
    """
    daily_counts = np.asarray(daily_counts)
    p = pop.visit_prob(daily_counts, idx)
    return (rng.random(p.shape) < p).sum(axis=1).astype(np.int64)


def realize_visits(user: UserProfile, schedule, rng: np.random.Generator) -> VisitLabel:
    schedule = np.asarray(schedule, dtype=np.int64)
    if user.arm == "control":
        schedule = np.zeros_like(schedule)
    p = true_visit_prob(user, schedule)
    y = int((rng.random(p.shape) < p).sum())
    s_final = int(schedule[-1]) if schedule.size else 0
    return VisitLabel(user.user_id, s_final, y)


@dataclass(frozen=True)
class Slots:
    ctr: np.ndarray
    history_impressions: np.ndarray
    history_clicks: np.ndarray


def generate_slots(config: MarketConfig, rng: np.random.Generator) -> Slots:
    ctr = rng.beta(config.slot_ctr_a, config.slot_ctr_b, config.n_slots)
    imps = np.full(config.n_slots, config.slot_history_impressions, dtype=np.int64)
    clicks = rng.binomial(imps, ctr)
    return Slots(ctr=ctr, history_impressions=imps, history_clicks=clicks)
