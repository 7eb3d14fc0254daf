import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from twistboost.adaptive import (
    ALPHA_CAP,
    NoiseEstimate,
    estimate_alpha0,
    estimate_from_confusion,
    estimate_noise,
    estimate_posterior_range,
    estimate_sln_rate,
)
from twistboost.data import Column, Dataset, SplitPlan, split, synth_xd6
from twistboost.losses import bayes_tilted_estimate, sln_twist_posterior
from twistboost.twisters import apply_class_noise


class TestSlnRate:
    def test_values(self):
        assert estimate_sln_rate(0.3, 0.6) == pytest.approx(0.34641016151377546, abs=1e-15)
        assert estimate_sln_rate(0.0, 1.0) == 0.0
        assert estimate_sln_rate(0.1, 0.9) == pytest.approx(0.1)

    def test_cap(self):
        assert estimate_sln_rate(0.5, 0.5) < 0.5

    def test_order(self):
        with pytest.raises(ValueError):
            estimate_sln_rate(0.6, 0.4)

    @given(st.floats(0.0, 0.5))
    def test_recovers_injected_rate(self, p):
        # the extreme clean posteriors 0 and 1 become p and 1 - p under SLN
        assert estimate_sln_rate(p, 1 - p) == pytest.approx(min(p, 0.5 - 1e-6), abs=1e-12)


class TestAlpha0:
    def test_clean(self):
        assert estimate_alpha0(0.0, 0.8) == 1.0

    def test_value(self):
        assert estimate_alpha0(0.3, 0.9) == pytest.approx(3.312594199773011, abs=1e-12)

    def test_cap(self):
        assert estimate_alpha0(0.49, 0.99) == ALPHA_CAP[1]

    def test_half_warns(self):
        with pytest.warns(UserWarning):
            assert estimate_alpha0(0.2, 0.5) == 1.0

    def test_domain(self):
        with pytest.raises(ValueError):
            estimate_alpha0(0.5, 0.7)
        with pytest.raises(ValueError):
            estimate_alpha0(0.1, 1.0)

    @given(st.floats(0.0, 0.45), st.floats(0.02, 0.98))
    def test_untwists_average_posterior(self, p, eta):
        if eta == 0.5:
            return
        a = estimate_alpha0(p, eta)
        assert ALPHA_CAP[0] <= a <= ALPHA_CAP[1]
        if abs(eta - 0.5) > 1e-3 and a < ALPHA_CAP[1]:
            assert bayes_tilted_estimate(a, sln_twist_posterior(eta, p)) == pytest.approx(eta, abs=1e-9)


class TestPosteriorRange:
    def test_single_class(self):
        ds = Dataset(np.arange(20.0)[:, None], np.ones(20, int), (Column("a"),))
        assert estimate_posterior_range(ds) == (1.0, 1.0, 1.0)

    def test_too_small(self):
        with pytest.raises(ValueError):
            estimate_posterior_range(synth_xd6(10))

    def test_unsplittable_root(self):
        ds = Dataset(np.zeros((40, 1)), np.tile([1, -1], 20), (Column("a"),))
        assert estimate_posterior_range(ds) == (0.5, 0.5, 0.5)

    def test_separable_threshold(self):
        x = np.arange(100.0)[:, None]
        ds = Dataset(x, np.where(x[:, 0] < 50, -1, 1), (Column("a"),))
        lo, hi, avg = estimate_posterior_range(ds)
        assert (lo, hi) == (0.0, 1.0) and avg == pytest.approx(0.5)

    def test_categorical(self):
        rng = np.random.default_rng(0)
        codes = rng.integers(0, 3, 300).astype(float)
        ds = Dataset(codes[:, None], np.where(codes == 1, 1, -1), (Column("c", "categorical", ("a", "b", "c")),))
        lo, hi, _ = estimate_posterior_range(ds)
        assert (lo, hi) == (0.0, 1.0)

    def test_uninformative_labels(self):
        # extremes over searched leaves are pushed off 1/2 by selection; averaged over seeds
        ranges = []
        for s in range(8):
            ds = synth_xd6(20_000, s)
            y = np.random.default_rng(s).choice([-1, 1], ds.m)
            ranges.append(estimate_posterior_range(ds.replace(y=y))[:2])
        lo, hi = np.mean(ranges, axis=0)
        assert abs(lo - 0.5) <= 0.1 and abs(hi - 0.5) <= 0.1

    def test_mean_matches_label_rate(self):
        ds = synth_xd6(400, 5)
        _, _, avg = estimate_posterior_range(ds)
        assert avg == pytest.approx((ds.y == 1).mean())


class TestEstimateNoise:
    @pytest.mark.parametrize("p", [0.0, 0.15, 0.3])
    def test_xd6_rate(self, p):
        ds = synth_xd6(973, 0)
        ests = []
        for fold in range(5):
            tr, _ = split(ds, SplitPlan(seed=1), fold)
            ests.append(estimate_noise(apply_class_noise(tr, p, fold)).p_hat)
        assert abs(np.mean(ests) - p) <= 0.07

    def test_fields(self):
        est = estimate_noise(apply_class_noise(synth_xd6(600, 1), 0.2, 0))
        assert isinstance(est, NoiseEstimate)
        assert est.eta_min <= est.eta_c_avg <= est.eta_max
        assert est.blunting
        assert 1.0 <= est.alpha0 <= 8.0

    def test_record_validation(self):
        with pytest.raises(ValueError):
            NoiseEstimate(0.6, 0.4, 0.1, 0.5, 1.0)


class TestConfusion:
    def test_counts(self):
        pred = np.array([1, 1, 1, -1, -1, -1, -1, -1])
        true = np.array([1, 1, -1, 1, -1, -1, -1, -1])
        est = estimate_from_confusion(pred, true)
        assert est.counts == {"TP": 2, "FP": 1, "FN": 1, "TN": 4}
        assert est.p_hat == pytest.approx((1 / 3 + 1 / 5) / 2)
        assert est.eta_c_hat == pytest.approx(3 / 8) and est.eta_t_hat == pytest.approx(3 / 8)

    def test_perfect(self):
        y = np.array([1, -1, 1, -1])
        est = estimate_from_confusion(y, y)
        assert est.p_hat == 0.0 and est.alpha0 == 1.0

    def test_empty_denominator(self):
        with pytest.warns(UserWarning):
            est = estimate_from_confusion(np.ones(4), np.array([1, 1, -1, 1]))
        assert est.p_hat == pytest.approx(0.25)

    def test_validation(self):
        with pytest.raises(ValueError):
            estimate_from_confusion([], [])
        with pytest.raises(ValueError):
            estimate_from_confusion([1, -1], [1])

    def test_alpha_from_confusion(self):
        est = estimate_from_confusion(np.array([1, 1, -1, -1, -1]), np.array([1, -1, -1, -1, 1]))
        assert math.isfinite(est.alpha0) and 1.0 <= est.alpha0 <= 8.0
