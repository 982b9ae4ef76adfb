"""Shared value types: exposure bins, user records, impression logs and currency."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

# Lower edges of the eight exposure classes {0, 1, 2, 3, 4, 5-9, 10-19, 20+}.
BIN_LOWER = (0, 1, 2, 3, 4, 5, 10, 20)
N_BINS = len(BIN_LOWER)

FEATURE_NAMES = ("frequency", "distance_km", "prior_impressions", "pcvr")

ARMS = ("baseline", "naive", "unbiased", "noclip", "control")

MICROS = 1_000_000


class Mechanism(str, enum.Enum):
    FIRST_PRICE = "first_price"
    SECOND_PRICE = "second_price"


@dataclass(frozen=True)
class ExposureBin:
    index: int
    lower: int
    upper: Optional[int]  # None for the open last bin

    def __contains__(self, count: int) -> bool:
        return count >= self.lower and (self.upper is None or count <= self.upper)


EXPOSURE_BINS = tuple(
    ExposureBin(b, lo, BIN_LOWER[b + 1] - 1 if b + 1 < N_BINS else None)
    for b, lo in enumerate(BIN_LOWER)
)

_EDGES = np.asarray(BIN_LOWER[1:])


def exposure_bin(count: int) -> ExposureBin:
    """Map an impression count to its exposure bin."""
    if count < 0:
        raise ValueError(f"impression count must be non-negative, got {count}")
    return EXPOSURE_BINS[int(np.searchsorted(_EDGES, count, side="right"))]


def bin_index(counts) -> np.ndarray:
    """Vectorised `exposure_bin(...).index` over an integer array."""
    counts = np.asarray(counts)
    if counts.size and counts.min() < 0:
        raise ValueError("impression counts must be non-negative")
    return np.searchsorted(_EDGES, counts, side="right")


def bin_gap(b: int) -> int:
    """Impressions between the lower edges of bin `b` and bin `b + 1`."""
    return BIN_LOWER[b + 1] - BIN_LOWER[b]


def to_micros(amount) -> np.ndarray:
    """Round currency amounts (in micro-units, possibly fractional) to int64 micros."""
    return np.floor(np.asarray(amount, dtype=float) + 0.5).astype(np.int64)


@dataclass(frozen=True)
class OutcomeParams:
    """Ground-truth visit model of one user; simulator-only."""

    beta0: float
    beta1: float
    beta2: float


@dataclass(frozen=True)
class UserProfile:
    user_id: int
    features: tuple[float, ...]
    arm: str
    truth: OutcomeParams = field(repr=False, compare=False)

    def __post_init__(self):
        freq, dist = self.features[0], self.features[1]
        if freq < 0 or dist < 0:
            raise ValueError("frequency and distance must be non-negative")


@dataclass(frozen=True)
class VisitLabel:
    user_id: int
    s_final: int
    y_obs: int


@dataclass(frozen=True)
class ImpressionLog:
    """One bid submitted on behalf of a user and how the auction resolved."""

    user_id: int
    day: int
    auction_id: int
    features: tuple[float, ...]
    exposure_count_before: int
    bin_before: int
    bid: int
    won: bool
    price_paid: int
    clearing_price: Optional[int]
    mechanism: Mechanism
    clicked: bool

    def __post_init__(self):
        if self.won and self.price_paid > self.bid:
            raise ValueError("price_paid exceeds bid")
        if not self.won and self.price_paid != 0:
            raise ValueError("lost auctions pay nothing")
        has_clearing = self.clearing_price is not None
        if has_clearing != (self.won and self.mechanism is Mechanism.SECOND_PRICE):
            raise ValueError("clearing_price is present iff a second-price auction was won")
