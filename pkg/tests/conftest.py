"""Shared fixtures: small plans for fast integration tests and the cached desk-scale study."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass

import numpy as np
import pytest

from liftbid.harness.experiment import (
    ExperimentPlan,
    run_ab_experiment,
    run_logging_campaign,
    train_bundles,
)
from liftbid.harness.metrics import MetricsReport, compute_metrics
from liftbid.learning.learners import LearnerConfig
from liftbid.learning.outcome import LossMode, lift_table
from liftbid.market import MarketConfig

DESK_SEEDS = tuple(range(20))


def small_plan(population: int = 6_000, **kw) -> ExperimentPlan:
    """Desk defaults scaled down so a full two-phase run takes a few seconds."""
    scale = population / MarketConfig().population
    base = dict(
        market=MarketConfig(population=population),
        learner=LearnerConfig(n_rounds=60, min_per_bin=5),
        baseline_budget=int(ExperimentPlan().baseline_budget * scale),
    )
    base.update(kw)
    return ExperimentPlan(**base)


def lift_rmse(bundle, features, truth) -> float:
    """RMSE of predicted amortized lift against the exact lift over bins 0..6."""
    tau = lift_table(bundle.outcome.predict(features))
    d = (tau - truth)[:, :-1].ravel()
    return math.sqrt(math.fsum(d * d) / d.size)


@dataclass
class SeedResult:
    seed: int
    report: MetricsReport
    rmse: dict  # LossMode -> float
    spend_fraction: dict  # arm -> spend / budget
    alpha_in_bounds: bool


def run_desk_seed(plan: ExperimentPlan, seed: int) -> SeedResult:
    campaign = run_logging_campaign(plan, seed)
    bundles = train_bundles(campaign, plan, seed)
    pop = campaign.world.population
    truth = pop.true_lift_table(plan.logging_days)
    rmse = {m: lift_rmse(b, pop.features, truth) for m, b in bundles.items()}
    runs = run_ab_experiment(plan, bundles, seed, world=campaign.world)
    spend, in_bounds = {}, True
    lo, hi = plan.pacing.alpha_min, plan.pacing.alpha_max
    for arm, run in runs.items():
        if run.pacing is None:
            continue
        spend[arm] = run.pacing.spend / run.pacing.budget
        alphas = [a for _, a, _ in run.pacing.trajectory] + [run.pacing.alpha]
        in_bounds &= all(lo <= a <= hi for a in alphas)
    return SeedResult(seed, compute_metrics(runs, plan.cpc), rmse, spend, in_bounds)


@pytest.fixture(scope="session")
def desk_study():
    """Twenty full desk-scale replications (default config), computed once per session."""
    plan = ExperimentPlan()
    logger = logging.getLogger("liftbid")
    level = logger.level
    logger.setLevel(logging.ERROR)
    try:
        t0 = time.perf_counter()
        results = [run_desk_seed(plan, s) for s in DESK_SEEDS]
        return results, time.perf_counter() - t0
    finally:
        logger.setLevel(level)


@pytest.fixture(scope="session")
def small_run():
    """One complete small two-phase run: (plan, campaign, bundles, runs)."""
    plan = small_plan()
    campaign = run_logging_campaign(plan, 11)
    bundles = train_bundles(campaign, plan, 11)
    runs = run_ab_experiment(plan, bundles, 11, world=campaign.world)
    return plan, campaign, bundles, runs


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
