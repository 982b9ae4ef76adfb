import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from liftbid.bidding import Bidder, ImpressionStore, PctrModel, bid_amounts, compute_bid, predict_pctr
from liftbid.domain import N_BINS, bin_index
from liftbid.learning import LossMode, OutcomePredictor, PcvrModel
from liftbid.learning.bundle import ModelBundle


class ConstModel:
    def __init__(self, c):
        self.c = c

    def predict(self, X):
        return np.full(len(np.atleast_2d(X)), self.c, dtype=float)


def _bundle(mode, levels, tau_bar=0.05, pcvr_mean=0.2):
    outcome = OutcomePredictor([ConstModel(v) for v in levels], mode)
    return ModelBundle(mode, outcome, tau_bar, PcvrModel(pcvr_mean), PctrModel([0], [0]))


LEVELS = [1.0, 1.05, 1.1, 1.12, 1.13, 1.14, 1.3, 1.35]  # lift 0.05 at bin 0
X = np.array([2.0, 3.0, 1.0, 0.2])  # pcvr feature 0.2
PCTR = PctrModel(np.array([0, 1000, 400]), np.array([0, 100, 10]))


def test_pctr_prior_and_smoothing():
    assert predict_pctr(0, PCTR) == pytest.approx(0.01)
    assert predict_pctr(1, PCTR) == pytest.approx(101 / 1100)
    assert predict_pctr(1, PCTR) == pytest.approx(0.0918181818181818181818, rel=1e-15)
    assert predict_pctr(99, PCTR) == pytest.approx(0.01)  # unknown slot falls back to the prior
    more = PctrModel(np.array([0, 1000, 400]), np.array([0, 101, 10]))
    assert predict_pctr(1, more) > predict_pctr(1, PCTR)
    again = PctrModel.from_dict(PCTR.to_dict())
    np.testing.assert_array_equal(again.predict([0, 1, 2]), PCTR.predict([0, 1, 2]))


@given(st.integers(0, 10**6), st.integers(0, 10**6))
def test_pctr_stays_in_open_unit_interval(imps, clicks):
    clicks = min(clicks, imps)
    p = PctrModel([imps], [clicks]).predict([0])[0]
    assert 0 < p < 1


def test_bid_formula_direct_product():
    assert bid_amounts(1.0, 0.01, 0.5, 100_000) == 500
    assert bid_amounts(0.0, 0.01, 0.5, 100_000) == 0
    assert bid_amounts(-3.0, 0.01, 0.5, 100_000) == 0  # negative phi floored
    assert bid_amounts(1e6, 0.5, 1.0, 100_000) == 100_000  # capped at CPC


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 1.99), st.floats(1e-4, 0.5), st.floats(0.01, 1.0), st.integers(1, 4))
def test_bid_is_linear_in_alpha_and_pctr(phi, pctr, alpha, k):
    cpc = 10**12  # large CPC keeps the cap and micro rounding out of the way
    base = phi * cpc * pctr * (alpha / k)
    got = bid_amounts(phi, pctr, alpha / k, cpc)
    np.testing.assert_allclose(got, base, rtol=1e-12, atol=0.5)
    np.testing.assert_allclose(bid_amounts(phi, pctr / k, alpha, cpc), base, rtol=1e-12, atol=0.5)


def test_lift_bidder_uses_normalized_lift():
    b = Bidder("naive", 100_000, PCTR, _bundle(LossMode.ERM, LEVELS))
    # phi = 0.05 / 0.05 = 1 at count 0, slot 0 has pCTR 0.01
    assert compute_bid(b, X, 0, 0, 0.5) == 500
    # count 6: bin 5 lift (1.3 - 1.14) / 5 = 0.032 -> phi 0.64
    assert compute_bid(b, X, 6, 0, 0.5) == 320
    # open last bin bids nothing
    assert compute_bid(b, X, 25, 0, 0.5) == 0


def test_baseline_bidder_uses_normalized_pcvr():
    b = Bidder("baseline", 100_000, PCTR, _bundle(LossMode.ERM, LEVELS, pcvr_mean=0.1))
    # phi = 0.2 / 0.1 = 2, independent of the impression count
    for c in (0, 3, 40):
        assert compute_bid(b, X, c, 0, 0.5) == 1000
    raw, phi = b.value_tables(X[None, :])
    np.testing.assert_allclose(raw, 0.2)
    np.testing.assert_allclose(phi, 2.0)


def test_control_never_bids():
    b = Bidder("control", 100_000, PCTR)
    assert not b.bids
    assert compute_bid(b, X, 0, 0, 1.0) is None


def test_lift_variants_differ_only_through_phi():
    levels_b = [1.0, 1.1, 1.1, 1.1, 1.1, 1.1, 1.1, 1.1]
    a = Bidder("naive", 100_000, PCTR, _bundle(LossMode.ERM, LEVELS))
    b = Bidder("unbiased", 100_000, PCTR, _bundle(LossMode.IPS_CLIPPED, levels_b, tau_bar=0.1))
    _, pa = a.value_tables(X[None, :])
    _, pb = b.value_tables(X[None, :])
    for c in range(0, 25):
        bn = int(bin_index([c])[0])
        want_a = int(bid_amounts(pa[0, bn], predict_pctr(2, PCTR), 0.3, 100_000))
        want_b = int(bid_amounts(pb[0, bn], predict_pctr(2, PCTR), 0.3, 100_000))
        assert compute_bid(a, X, c, 2, 0.3) == want_a
        assert compute_bid(b, X, c, 2, 0.3) == want_b


def test_variant_bundle_mode_is_enforced():
    with pytest.raises(ValueError):
        Bidder("unbiased", 100_000, PCTR, _bundle(LossMode.ERM, LEVELS))
    with pytest.raises(ValueError):
        Bidder("noclip", 100_000, PCTR)
    with pytest.raises(ValueError):
        Bidder("auction-house", 100_000, PCTR)
    with pytest.raises(ValueError):
        compute_bid(Bidder("naive", 100_000, PCTR, _bundle(LossMode.ERM, LEVELS)), X, 0, 0, 1.5)


def test_impression_store_counts_wins():
    store = ImpressionStore([10, 11, 12])
    assert store.count(10) == 0
    assert store.record_win(10) == 1
    for _ in range(21):
        store.record_win(11)
    assert store.count(11) == 21
    assert bin_index([store.count(11)])[0] == N_BINS - 1
    store.record_wins_at(np.array([0, 2]))
    assert [store.count(u) for u in (10, 11, 12)] == [2, 21, 1]


def test_interleaved_reads_see_prior_writes():
    rng = np.random.default_rng(0)
    store = ImpressionStore(np.arange(5))
    shadow = np.zeros(5, dtype=int)
    for u in rng.integers(0, 5, size=200):
        assert store.count(int(u)) == shadow[u]
        if rng.random() < 0.5:
            store.record_win(int(u))
            shadow[u] += 1
