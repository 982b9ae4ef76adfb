"""Event loop for one arm: hourly request arrivals, bidding, auctions, clicks and visits."""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from ..bidding import PctrModel, bid_amounts
from ..domain import ImpressionLog, Mechanism, bin_index
from ..market import MarketConfig, Population, Slots, draw_competing_bids, realize_visit_counts, resolve
from ..pacing import PacingState, update_alpha

HOURS_PER_DAY = 24


@dataclass
class AuctionLog:
    """Columnar log of every submitted bid, in event order."""

    user_id: np.ndarray
    day: np.ndarray
    hour: np.ndarray
    auction_id: np.ndarray
    slot: np.ndarray
    count_before: np.ndarray
    bid: np.ndarray
    won: np.ndarray
    second_price: np.ndarray
    price_paid: np.ndarray
    clearing_price: np.ndarray  # -1 where absent
    clicked: np.ndarray
    raw_value: np.ndarray  # unnormalized pCVR (baseline) or lift prediction
    phi: np.ndarray

    DTYPES = {
        "user_id": np.int64, "day": np.int64, "hour": np.int64, "auction_id": np.int64,
        "slot": np.int64, "count_before": np.int64, "bid": np.int64, "won": bool,
        "second_price": bool, "price_paid": np.int64, "clearing_price": np.int64,
        "clicked": bool, "raw_value": float, "phi": float,
    }

    @classmethod
    def names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    @classmethod
    def empty(cls) -> "AuctionLog":
        return cls(**{k: np.zeros(0, dtype=t) for k, t in cls.DTYPES.items()})

    @classmethod
    def concat(cls, chunks: list[dict]) -> "AuctionLog":
        if not chunks:
            return cls.empty()
        return cls(**{k: np.concatenate([c[k] for c in chunks]).astype(t) for k, t in cls.DTYPES.items()})

    def __len__(self) -> int:
        return len(self.user_id)

    @property
    def bin_before(self) -> np.ndarray:
        return bin_index(self.count_before)

    def records(self, features_by_user: dict | None = None):
        for k in range(len(self)):
            feats = () if features_by_user is None else features_by_user[int(self.user_id[k])]
            cp = int(self.clearing_price[k])
            yield ImpressionLog(
                user_id=int(self.user_id[k]),
                day=int(self.day[k]),
                auction_id=int(self.auction_id[k]),
                features=feats,
                exposure_count_before=int(self.count_before[k]),
                bin_before=int(bin_index([self.count_before[k]])[0]),
                bid=int(self.bid[k]),
                won=bool(self.won[k]),
                price_paid=int(self.price_paid[k]),
                clearing_price=None if cp < 0 else cp,
                mechanism=Mechanism.SECOND_PRICE if self.second_price[k] else Mechanism.FIRST_PRICE,
                clicked=bool(self.clicked[k]),
            )

    def equals(self, other: "AuctionLog") -> bool:
        return all(np.array_equal(getattr(self, k), getattr(other, k)) for k in self.DTYPES)


@dataclass
class ArmRun:
    arm: str
    user_id: np.ndarray
    features: np.ndarray
    log: AuctionLog
    daily_counts: np.ndarray  # (n_users, days), exposure count in effect at end of each day
    visits: np.ndarray
    phi_initial: np.ndarray  # floored phi at zero impressions, per user
    pacing: PacingState | None = None
    requests: int = 0  # bid requests received, whether or not a bid was submitted

    @property
    def s_final(self) -> np.ndarray:
        if self.daily_counts.shape[1] == 0:
            return np.zeros(len(self.user_id), dtype=np.int64)
        return self.daily_counts[:, -1]


def simulate_arm(
    arm: str,
    pop: Population,
    idx: np.ndarray,
    market: MarketConfig,
    slots: Slots,
    pctr: PctrModel,
    cpc: int,
    days: int,
    raw_table: np.ndarray | None,
    phi_table: np.ndarray | None,
    rng_auctions: np.random.Generator,
    rng_visits: np.random.Generator,
    pacing: PacingState | None = None,
    alpha: float = 1.0,
) -> ArmRun:
    """Run `days` of hourly ticks for the users `idx` of one arm.

    A `None` phi table means the arm never bids (control). Within an hour each
    round serves at most one request per user, so a user's later requests see
    the impressions won earlier. Alpha is read once per round and updated at
    every cadence boundary; with a pacing state the budget is a hard cap.
    """
    idx = np.asarray(idx, dtype=np.int64)
    n = len(idx)
    counts = np.zeros(n, dtype=np.int64)
    daily = np.zeros((n, days), dtype=np.int64)
    hourly_rate = pop.request_rate[idx] / HOURS_PER_DAY
    competition = pop.competition[idx]
    user_ids = pop.user_id[idx]
    chunks = []
    next_id = 0
    n_requests = 0
    bidding = phi_table is not None

    for day in range(days):
        for hour in range(HOURS_PER_DAY):
            clock = day * HOURS_PER_DAY + hour
            k = rng_auctions.poisson(hourly_rate)
            n_requests += int(k.sum())
            for r in range(int(k.max()) if (bidding and n) else 0):
                pos = np.flatnonzero(k > r)
                m = len(pos)
                slot = rng_auctions.integers(0, len(slots.ctr), size=m)
                competing = draw_competing_bids(market, competition[pos], rng_auctions)
                second = rng_auctions.random(m) < market.second_price_fraction
                click_u = rng_auctions.random(m)

                a = pacing.alpha if pacing is not None else alpha
                b = bin_index(counts[pos])
                phi = phi_table[pos, b]
                bids = bid_amounts(phi, pctr.predict(slot), a, cpc)
                res = resolve(bids, competing, second)
                submit = bids > 0
                if pacing is not None:
                    spent = np.cumsum(np.where(submit, res.price_paid, 0))
                    submit &= (spent <= pacing.remaining) & (pacing.remaining > 0)
                won = res.won & submit
                price = np.where(won, res.price_paid, 0)
                clicked = won & (click_u < slots.ctr[slot])
                if pacing is not None:
                    pacing.record_spend(int(price.sum()))

                s = np.flatnonzero(submit)
                if len(s):
                    chunks.append({
                        "user_id": user_ids[pos[s]],
                        "day": np.full(len(s), day),
                        "hour": np.full(len(s), clock),
                        "auction_id": next_id + np.arange(len(s)),
                        "slot": slot[s],
                        "count_before": counts[pos[s]],
                        "bid": bids[s],
                        "won": won[s],
                        "second_price": second[s],
                        "price_paid": price[s],
                        "clearing_price": np.where(won[s] & second[s], competing[s], -1),
                        "clicked": clicked[s],
                        "raw_value": raw_table[pos[s], b[s]],
                        "phi": phi[s],
                    })
                    next_id += len(s)
                counts[pos[won]] += 1
            if pacing is not None and (clock + 1) % pacing.config.cadence_hours == 0:
                update_alpha(pacing, clock)
        daily[:, day] = counts

    visits = realize_visit_counts(pop, idx, daily, rng_visits)
    phi0 = np.zeros(n) if phi_table is None else np.maximum(phi_table[:, 0], 0.0)
    return ArmRun(arm, user_ids, pop.features[idx], AuctionLog.concat(chunks), daily, visits, phi0, pacing,
                  n_requests)

