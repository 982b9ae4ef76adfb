"""Per-arm business metrics with standard errors, raw and normalized to the baseline arm."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..domain import ARMS
from .engine import ArmRun

METRICS = (
    "ctr",
    "user_ctr",
    "mean_visits",
    "visit_lift",
    "cpia",
    "pct_inventory_cost",
    "avg_inventory_cost",
    "win_rate",
    "price_diff",
)
# Metrics that only make sense for an arm that buys impressions.
COST_METRICS = tuple(m for m in METRICS if m not in ("mean_visits", "visit_lift"))
COUNTS = ("users", "bid_requests", "bids", "impressions", "clicks", "spend", "cpc_charge")

# phi histogram bins: [0, 0.5), [0.5, 1.5), ..., [5.5, 6.5]
PHI_EDGES = (0.0, 0.5, 1.5, 2.5, 3.5, 4.5, 5.5, 6.5)
WIN_BID_QUANTILES = (0.1, 0.25, 0.5, 0.75, 0.9)


@dataclass(frozen=True)
class Estimate:
    """A point estimate and its standard error; None marks an undefined value."""

    value: float | None
    se: float | None = None

    def to_list(self) -> list:
        return [self.value, self.se]


UNDEFINED = Estimate(None, None)


def _mean_se(x) -> Estimate:
    x = np.asarray(x, dtype=float)
    n = len(x)
    if n == 0:
        return UNDEFINED
    mean = math.fsum(x) / n
    se = float(np.std(x, ddof=1) / math.sqrt(n)) if n > 1 else None
    return Estimate(mean, se)


def _proportion(k: int, n: int) -> Estimate:
    if n == 0:
        return UNDEFINED
    p = k / n
    return Estimate(p, math.sqrt(p * (1.0 - p) / n))


def _ratio(num, den) -> Estimate:
    """Ratio of sums with a linearized (delta-method) standard error."""
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    total = math.fsum(den)
    n = len(den)
    if n == 0 or total == 0:
        return UNDEFINED
    r = math.fsum(num) / total
    se = None
    if n > 1:
        resid = num - r * den
        se = math.sqrt(math.fsum(resid**2) * n / (n - 1)) / abs(total)
    return Estimate(r, se)


def _positions(user_ids: np.ndarray, query: np.ndarray) -> np.ndarray:
    order = np.argsort(user_ids, kind="stable")
    return order[np.searchsorted(user_ids, query, sorter=order)]


def arm_counts(run: ArmRun, cpc: int) -> dict:
    lg = run.log
    clicks = int(lg.clicked.sum())
    return {
        "users": len(run.user_id),
        "bid_requests": int(run.requests),
        "bids": len(lg),
        "impressions": int(lg.won.sum()),
        "clicks": clicks,
        "spend": int(lg.price_paid.sum()),
        "cpc_charge": cpc * clicks,
    }


def arm_metrics(run: ArmRun, cpc: int, control: ArmRun | None) -> dict[str, Estimate]:
    lg = run.log
    c = arm_counts(run, cpc)
    out = {m: UNDEFINED for m in METRICS}
    out["mean_visits"] = _mean_se(run.visits)
    if control is not None:
        ctl = _mean_se(control.visits)
        arm = out["mean_visits"]
        if arm.value is not None and ctl.value is not None:
            se = None if arm.se is None or ctl.se is None else math.sqrt(arm.se**2 + ctl.se**2)
            out["visit_lift"] = Estimate(arm.value - ctl.value, se)
    if run.arm == "control":
        return out

    won = lg.won
    out["ctr"] = _proportion(c["clicks"], c["impressions"])
    if c["impressions"]:
        pos = _positions(run.user_id, lg.user_id[won])
        imps = np.bincount(pos, minlength=len(run.user_id))
        clicks = np.bincount(pos, weights=lg.clicked[won], minlength=len(run.user_id))
        seen = imps > 0
        out["user_ctr"] = _mean_se(clicks[seen] / imps[seen])

    lift = out["visit_lift"]
    if lift.value is not None and lift.value > 0:
        cpia = c["cpc_charge"] / (lift.value * c["users"])
        se = None if lift.se is None else cpia * lift.se / lift.value
        out["cpia"] = Estimate(cpia, se)

    out["pct_inventory_cost"] = _ratio(lg.price_paid[won], cpc * lg.clicked[won].astype(np.int64))
    out["avg_inventory_cost"] = _mean_se(lg.price_paid[won])
    out["win_rate"] = _proportion(c["impressions"], c["bid_requests"])
    sp = won & lg.second_price
    out["price_diff"] = _mean_se(lg.bid[sp] - lg.clearing_price[sp])
    return out


def normalize(raw: dict[str, dict[str, Estimate]], reference: str = "baseline") -> dict:
    """Divide every metric by the reference arm's value; the reference row becomes exactly 1."""
    ref = raw.get(reference)
    out = {}
    for arm, row in raw.items():
        out[arm] = {}
        for m, est in row.items():
            base = None if ref is None else ref[m].value
            if est.value is None or base is None or base == 0:
                out[arm][m] = UNDEFINED
                continue
            se = None if est.se is None else est.se / abs(base)
            out[arm][m] = Estimate(1.0 if arm == reference else est.value / base, se)
    return out


def phi_bin(phi) -> np.ndarray:
    """Index into PHI_EDGES bins; -1 below 0, len(PHI_EDGES) - 1 above 6.5."""
    phi = np.asarray(phi, dtype=float)
    idx = np.searchsorted(PHI_EDGES, phi, side="right") - 1
    idx = np.where(phi == PHI_EDGES[-1], len(PHI_EDGES) - 2, idx)
    return idx


def phi_bin_rows(run: ArmRun) -> list[dict]:
    """Mean visits of users binned by the arm's initial phi."""
    idx = phi_bin(run.phi_initial)
    rows = []
    for b in range(len(PHI_EDGES) - 1):
        est = _mean_se(run.visits[idx == b])
        rows.append({
            "arm": run.arm, "bin": b, "lower": PHI_EDGES[b], "upper": PHI_EDGES[b + 1],
            "users": int((idx == b).sum()), "mean_visits": est.value, "se": est.se,
        })
    return rows


def win_bid_row(run: ArmRun) -> dict:
    bids = run.log.bid[run.log.won]
    row = {"arm": run.arm, "wins": int(len(bids))}
    qs = np.quantile(bids, WIN_BID_QUANTILES) if len(bids) else [None] * len(WIN_BID_QUANTILES)
    for q, v in zip(WIN_BID_QUANTILES, qs):
        row[f"q{int(round(q * 100)):02d}"] = None if v is None else float(v)
    return row


@dataclass(frozen=True)
class MetricsReport:
    cpc: int
    arms: tuple[str, ...]
    counts: dict
    raw: dict
    normalized: dict
    phi_bins: list = field(default_factory=list)
    phi_above_range: dict = field(default_factory=dict)
    win_bids: list = field(default_factory=list)
    pacing: list = field(default_factory=list)  # (hour, arm, alpha, window spend)

    def to_dict(self) -> dict:
        def table(t):
            return {a: {m: t[a][m].to_list() for m in METRICS} for a in self.arms}

        return {
            "schema": "liftbid.metrics_report",
            "version": 1,
            "cpc": self.cpc,
            "arms": list(self.arms),
            "metrics": list(METRICS),
            "counts": {a: self.counts[a] for a in self.arms},
            "raw": table(self.raw),
            "normalized": table(self.normalized),
            "phi_bins": self.phi_bins,
            "phi_above_range": self.phi_above_range,
            "win_bids": self.win_bids,
            "pacing": [list(r) for r in self.pacing],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        if d.get("schema") != "liftbid.metrics_report" or d.get("version") != 1:
            raise ValueError("not a version 1 metrics report")

        def table(t):
            return {a: {m: Estimate(*t[a][m]) for m in METRICS} for a in d["arms"]}

        return cls(
            cpc=d["cpc"],
            arms=tuple(d["arms"]),
            counts=d["counts"],
            raw=table(d["raw"]),
            normalized=table(d["normalized"]),
            phi_bins=d["phi_bins"],
            phi_above_range=d["phi_above_range"],
            win_bids=d["win_bids"],
            pacing=[tuple(r) for r in d["pacing"]],
        )

    def value(self, arm: str, metric: str, normalized: bool = False) -> float | None:
        return (self.normalized if normalized else self.raw)[arm][metric].value


def compute_metrics(runs: dict[str, ArmRun], cpc: int) -> MetricsReport:
    arms = tuple(a for a in ARMS if a in runs) + tuple(a for a in runs if a not in ARMS)
    control = runs.get("control")
    raw = {a: arm_metrics(runs[a], cpc, control) for a in arms}
    phi_bins, above, pacing = [], {}, []
    for a in arms:
        run = runs[a]
        if a != "control":
            phi_bins.extend(phi_bin_rows(run))
            above[a] = int((run.phi_initial > PHI_EDGES[-1]).sum())
        if run.pacing is not None:
            pacing.extend((int(h), a, float(alpha), int(spend)) for h, alpha, spend in run.pacing.trajectory)
    return MetricsReport(
        cpc=cpc,
        arms=arms,
        counts={a: arm_counts(runs[a], cpc) for a in arms},
        raw=raw,
        normalized=normalize(raw),
        phi_bins=phi_bins,
        phi_above_range=above,
        win_bids=[win_bid_row(runs[a]) for a in arms if a != "control"],
        pacing=pacing,
    )
