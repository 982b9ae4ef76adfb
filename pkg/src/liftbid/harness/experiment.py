"""Two-phase experiment: a biased logging campaign, training, then the five-arm A/B run."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..bidding import VARIANT_MODES, Bidder, PctrModel
from ..domain import ARMS, N_BINS
from ..learning.bundle import ModelBundle, train_bundle
from ..learning.learners import LearnerConfig
from ..learning.outcome import LossMode, fit_pcvr, normalize_phi
from ..market import MarketConfig, Population, Slots, generate_population, generate_slots
from ..pacing import PacingConfig, PacingState
from ..streams import substream
from .engine import HOURS_PER_DAY, ArmRun, simulate_arm

log = logging.getLogger(__name__)

DEFAULT_BUDGET_RATIOS = {"baseline": 1.0, "naive": 0.1, "unbiased": 0.1, "noclip": 0.1, "control": 0.0}


@dataclass(frozen=True)
class ExperimentPlan:
    market: MarketConfig = field(default_factory=MarketConfig)
    learner: LearnerConfig = field(default_factory=LearnerConfig)
    pacing: PacingConfig = field(default_factory=PacingConfig)
    cpc: int = 100_000
    logging_days: int = 7
    logging_alpha: float = 0.6
    ab_days: int = 7
    baseline_budget: int = 80_000_000
    budget_ratios: dict = field(default_factory=lambda: dict(DEFAULT_BUDGET_RATIOS))
    seed: int = 0

    def __post_init__(self):
        if set(self.budget_ratios) != set(ARMS):
            raise ValueError(f"budget_ratios must name exactly the arms {ARMS}")
        if self.budget_ratios["control"] != 0:
            raise ValueError("the control arm cannot have a budget")
        if any(r < 0 for r in self.budget_ratios.values()):
            raise ValueError("budget ratios must be non-negative")
        if self.cpc <= 0 or self.logging_days < 0 or self.ab_days < 0:
            raise ValueError("cpc must be positive and day counts non-negative")
        if not 0 < self.logging_alpha <= 1:
            raise ValueError("logging_alpha must lie in (0, 1]")

    def budget(self, arm: str) -> int:
        return int(round(self.baseline_budget * self.budget_ratios[arm]))


@dataclass
class World:
    population: Population
    slots: Slots


def build_world(plan: ExperimentPlan, seed: int) -> World:
    return World(
        generate_population(plan.market, substream(seed, "population")),
        generate_slots(plan.market, substream(seed, "slots")),
    )


@dataclass
class LoggingCampaign:
    world: World
    run: ArmRun

    @property
    def pctr(self) -> PctrModel:
        """Slot history plus the clicks and impressions observed during the campaign."""
        slots = self.world.slots
        lg = self.run.log
        imps = np.bincount(lg.slot[lg.won], minlength=len(slots.ctr))
        clicks = np.bincount(lg.slot[lg.clicked], minlength=len(slots.ctr))
        return PctrModel(slots.history_impressions + imps, slots.history_clicks + clicks)


def run_logging_campaign(plan: ExperimentPlan, seed: int, world: World | None = None) -> LoggingCampaign:
    """The production performance bidder at a fixed alpha over the whole population.

    Bids scale with the logged pCVR feature, so heavy organic visitors collect
    more impressions: the exposure bias the IPS correction targets.
    """
    world = world or build_world(plan, seed)
    pop = world.population
    idx = np.arange(len(pop))
    pcvr = fit_pcvr(pop.features)
    raw = np.repeat(pcvr.predict_raw(pop.features)[:, None], N_BINS, axis=1)
    phi = normalize_phi(raw, pcvr.mean_prediction)
    pctr = PctrModel(world.slots.history_impressions, world.slots.history_clicks)
    run = simulate_arm(
        "logging", pop, idx, plan.market, world.slots, pctr, plan.cpc, plan.logging_days,
        raw, phi, substream(seed, "logging", "auctions"), substream(seed, "logging", "visits"),
        pacing=None, alpha=plan.logging_alpha,
    )
    return LoggingCampaign(world, run)


def train_bundles(campaign: LoggingCampaign, plan: ExperimentPlan, seed: int,
                  modes=tuple(LossMode)) -> dict[LossMode, ModelBundle]:
    run = campaign.run
    pctr = campaign.pctr
    return {
        LossMode(m): train_bundle(run.features, run.s_final, run.visits, pctr, m, plan.learner, seed)
        for m in modes
    }


def make_bidders(plan: ExperimentPlan, bundles: dict[LossMode, ModelBundle]) -> dict[str, Bidder]:
    erm = bundles[LossMode.ERM]
    out = {}
    for arm in ARMS:
        if arm in VARIANT_MODES:
            bundle = bundles[VARIANT_MODES[arm]]
        elif arm == "baseline":
            bundle = erm
        else:
            bundle = None
        out[arm] = Bidder(arm, plan.cpc, erm.pctr, bundle)
    return out


def run_ab_experiment(plan: ExperimentPlan, bundles: dict[LossMode, ModelBundle], seed: int,
                      world: World | None = None, arms=ARMS) -> dict[str, ArmRun]:
    """Simulate every arm over the A/B horizon; each arm owns its own random substreams."""
    world = world or build_world(plan, seed)
    pop = world.population
    bidders = make_bidders(plan, bundles)
    horizon = max(plan.ab_days * HOURS_PER_DAY, 1)
    runs = {}
    for arm in arms:
        idx = pop.arm_members(arm)
        bidder = bidders[arm]
        raw = phi = pacing = None
        if bidder.bids:
            raw, phi = bidder.value_tables(pop.features[idx])
            pacing = PacingState(plan.budget(arm), horizon, plan.pacing)
        runs[arm] = simulate_arm(
            arm, pop, idx, plan.market, world.slots, bidder.pctr, plan.cpc, plan.ab_days,
            raw, phi, substream(seed, "ab", arm, "auctions"), substream(seed, "ab", arm, "visits"),
            pacing=pacing,
        )
    return runs
