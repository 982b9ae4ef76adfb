"""Per-request bidding: shared pCTR, the five variants, and the impression-count store."""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .domain import N_BINS, bin_index, to_micros
from .learning.outcome import LossMode, lift_table, normalize_phi

if TYPE_CHECKING:
    from .learning.bundle import ModelBundle

VARIANT_MODES = {
    "naive": LossMode.ERM,
    "unbiased": LossMode.IPS_CLIPPED,
    "noclip": LossMode.IPS,
}
VARIANTS = ("baseline", "naive", "unbiased", "noclip", "control")


class PctrModel:
    """Beta-smoothed historical CTR per slot; unknown slots get the prior mean."""

    def __init__(self, impressions, clicks, a: float = 1.0, b: float = 99.0):
        self.impressions = np.asarray(impressions, dtype=np.int64)
        self.clicks = np.asarray(clicks, dtype=np.int64)
        self.a = float(a)
        self.b = float(b)
        self._table = (self.clicks + self.a) / (self.impressions + self.a + self.b)

    @property
    def prior(self) -> float:
        return self.a / (self.a + self.b)

    def predict(self, slots) -> np.ndarray:
        slots = np.asarray(slots, dtype=np.int64)
        out = np.full(slots.shape, self.prior)
        known = (slots >= 0) & (slots < len(self._table))
        out[known] = self._table[slots[known]]
        return out

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "impressions": self.impressions.tolist(),
                "clicks": self.clicks.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "PctrModel":
        return cls(d["impressions"], d["clicks"], d["a"], d["b"])


def predict_pctr(slot: int, model: PctrModel) -> float:
    return float(model.predict(np.array([slot]))[0])


class ImpressionStore:
    """Impression count per user; only won auctions are counted."""

    def __init__(self, user_ids):
        self._pos = {int(u): k for k, u in enumerate(np.asarray(user_ids))}
        self.counts = np.zeros(len(self._pos), dtype=np.int64)

    def count(self, user_id: int) -> int:
        return int(self.counts[self._pos[user_id]])

    def record_win(self, user_id: int) -> int:
        k = self._pos[user_id]
        self.counts[k] += 1
        return int(self.counts[k])

    def record_wins_at(self, positions) -> None:
        """Vectorised wins by store position; positions must be distinct."""
        self.counts[positions] += 1


@dataclass
class Bidder:
    """One experiment arm's bidding policy.

    `bundle` is required for every variant except control; the baseline uses
    only its pooled pCVR model and the lift variants its outcome predictors.
    """

    variant: str
    cpc: int
    pctr: PctrModel
    bundle: ModelBundle | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.variant in VARIANT_MODES:
            if self.bundle is None:
                raise ValueError(f"{self.variant} needs a trained bundle")
            want = VARIANT_MODES[self.variant]
            if self.bundle.mode is not want:
                raise ValueError(f"{self.variant} needs a {want.value} bundle, got {self.bundle.mode.value}")
        elif self.variant == "baseline" and self.bundle is None:
            raise ValueError("baseline needs a bundle carrying the pCVR model")

    @property
    def bids(self) -> bool:
        return self.variant != "control"

    def value_tables(self, X) -> tuple[np.ndarray, np.ndarray]:
        """(raw, phi) per user and exposure bin; phi is unfloored."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.variant == "control":
            z = np.zeros((len(X), N_BINS))
            return z, z
        if self.variant == "baseline":
            raw = np.repeat(self.bundle.pcvr.predict_raw(X)[:, None], N_BINS, axis=1)
            return raw, normalize_phi(raw, self.bundle.pcvr.mean_prediction)
        raw = lift_table(self.bundle.outcome.predict(X))
        return raw, normalize_phi(raw, self.bundle.tau_bar)


def bid_amounts(phi, pctr, alpha, cpc) -> np.ndarray:
    """phi * CPC * pCTR * alpha in micros, with phi floored at 0 and the bid capped at CPC."""
    phi = np.maximum(np.asarray(phi, dtype=float), 0.0)
    raw = phi * cpc * np.asarray(pctr, dtype=float) * alpha
    return to_micros(np.minimum(raw, cpc))


def compute_bid(bidder: Bidder, x, count: int, slot: int, alpha: float) -> int | None:
    """Bid for a single request; None for the control arm, which never bids."""
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    if not bidder.bids:
        return None
    _, phi = bidder.value_tables(np.atleast_2d(x))
    b = int(bin_index([count])[0])
    return int(bid_amounts(phi[0, b], predict_pctr(slot, bidder.pctr), alpha, bidder.cpc))
