"""Tests for the regularly varying weight sequence and its summaries.

The frozen V values below come from direct summation of 1 - exp(-p_k t)
over k <= 1e7 plus a three-term series remainder (truncation error
below 1e-28 absolute), evaluated independently of the library code.
"""

import math

import numpy as np
import pytest
import scipy.special as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from karlin import weights as wt
from karlin.errors import DomainError

# (alpha, t) -> brute-force V(t)
BRUTE_V = {
    (0.5, 1.0): 0.833009122278957,
    (0.5, 400.0): 27.139531958995757,
    (0.5, 800.0): 38.5882009522164,
    (0.5, 1200.0): 47.37307364817149,
    (0.5, 1600.0): 54.779063915413644,
    (0.5, 2400.0): 67.2027500257308,
    (0.5, 1_000_000.0): 1381.4765978853427,
    (0.3, 400.0): 7.016231333583897,
    (0.3, 800.0): 8.753580353253128,
    (0.3, 1200.0): 9.950530416527236,
}


class TestZeta:
    def test_matches_scipy_on_a_grid(self):
        s = np.concatenate([np.linspace(1.05, 2.0, 13), np.linspace(2.5, 12.0, 9)])
        ours = np.array([wt.zeta_riemann(v) for v in s])
        np.testing.assert_allclose(ours, sp.zeta(s), rtol=1e-13)

    def test_rejects_pole(self):
        with pytest.raises(DomainError):
            wt.zeta_riemann(1.0)


class TestWeightSequence:
    def test_normalizing_constants(self):
        assert wt.make_weights(0.5).c == pytest.approx(6.0 / math.pi**2, rel=1e-14)
        assert wt.make_weights(0.25).c == pytest.approx(90.0 / math.pi**4, rel=1e-13)
        assert wt.make_weights(0.5).c == pytest.approx(0.6079271018540267, rel=1e-14)

    @pytest.mark.parametrize("alpha", [-0.1, 0.0, 1.0, 1.5])
    def test_alpha_domain(self, alpha):
        with pytest.raises(DomainError):
            wt.make_weights(alpha)

    def test_weights_sum_to_one(self):
        for alpha in (0.3, 0.5, 0.8):
            ws = wt.make_weights(alpha)
            head = float(np.sum(wt.weights_array(ws, 100_000)))
            tail = wt.tail_power_sum(ws, 1, 100_001)
            assert head + tail == pytest.approx(1.0, abs=1e-12)

    def test_weight_scalar_and_array_agree(self):
        ws = wt.make_weights(0.4)
        k = np.array([1, 2, 17, 1000])
        np.testing.assert_array_equal(wt.weight(ws, k), [wt.weight(ws, int(v)) for v in k])

    def test_weight_rejects_bad_index(self):
        ws = wt.make_weights(0.4)
        with pytest.raises(DomainError):
            wt.weight(ws, 0)

    @given(st.floats(0.1, 0.9), st.integers(1, 10**6))
    @settings(max_examples=40, deadline=None)
    def test_weights_strictly_decreasing(self, alpha, k):
        ws = wt.make_weights(alpha)
        assert wt.weight(ws, k) > wt.weight(ws, k + 1) > 0.0

    def test_tail_power_sum_against_polygamma(self):
        # sum_{k>=K} p_k = c * trigamma(K) when the decay exponent is 2
        ws = wt.make_weights(0.5)
        for start in (1, 10, 1000):
            assert wt.tail_power_sum(ws, 1, start) == pytest.approx(
                ws.c * float(sp.polygamma(1, start)), rel=1e-12
            )


class TestNu:
    def test_frozen_values(self):
        ws = wt.make_weights(0.5)
        assert wt.nu_count(ws, 100.0) == 7
        assert wt.nu_count(ws, 1_000_000.0) == 779
        assert wt.sigma2(ws, 1_000_000) == 779.0

    def test_below_first_box_is_zero(self):
        ws = wt.make_weights(0.5)
        assert wt.nu_count(ws, 1.0) == 0  # c*t < 1
        assert wt.nu_count(ws, 0.0) == 0

    @given(st.floats(0.15, 0.9), st.floats(0.0, 1e7))
    @settings(max_examples=60, deadline=None)
    def test_matches_floor_formula(self, alpha, t):
        ws = wt.make_weights(alpha)
        got = wt.nu_count(ws, t)
        ct = ws.c * t
        if ct < 1.0:
            assert got == 0
        else:
            # allow the documented snap at exact-power boundaries
            assert got in (math.floor(ct**alpha), math.floor(ct**alpha) + 1)
            assert abs(got - ct**alpha) <= max(1.0, 1e-9 * ct**alpha)

    @given(st.floats(0.2, 0.8), st.floats(0.0, 1e5), st.floats(1.0, 10.0))
    @settings(max_examples=40, deadline=None)
    def test_nondecreasing(self, alpha, t, factor):
        ws = wt.make_weights(alpha)
        assert wt.nu_count(ws, t * factor) >= wt.nu_count(ws, t)


class TestBigV:
    @pytest.mark.parametrize(("alpha", "t"), sorted(BRUTE_V))
    def test_frozen_brute_values(self, alpha, t):
        ws = wt.make_weights(alpha)
        np.testing.assert_allclose(wt.big_v(ws, t), BRUTE_V[(alpha, t)], rtol=1e-10)

    def test_zero_and_monotone(self):
        ws = wt.make_weights(0.6)
        assert wt.big_v(ws, 0.0) == 0.0
        ts = np.array([0.5, 1.0, 5.0, 50.0, 5e3, 5e6])
        vals = np.array([wt.big_v(ws, float(t)) for t in ts])
        assert np.all(np.diff(vals) > 0.0)

    def test_gamma_limit_ratio(self):
        ws = wt.make_weights(0.5)
        ratio = wt.big_v(ws, 1e6) / wt.nu_count(ws, 1e6)
        np.testing.assert_allclose(ratio, 1.7733974298913258, rtol=1e-12)
        # and the limiting constant itself
        np.testing.assert_allclose(
            wt.gamma_one_minus_alpha(0.5), math.sqrt(math.pi), rtol=1e-14
        )

    def test_subadditive_in_t(self):
        # V(s+t) <= V(s) + V(t): concavity of 1-exp(-x) through 0
        ws = wt.make_weights(0.4)
        for s, t in ((1.0, 2.0), (10.0, 0.3), (1e3, 1e4)):
            assert wt.big_v(ws, s + t) <= wt.big_v(ws, s) + wt.big_v(ws, t) + 1e-12


class TestOccupancyMeans:
    @pytest.mark.parametrize("alpha", [0.3, 0.5, 0.7])
    @pytest.mark.parametrize("m", [10, 1000, 100_000])
    def test_mean_occupancy_against_brute(self, alpha, m):
        ws = wt.make_weights(alpha)
        k = np.arange(1, 2_000_001, dtype=np.float64)
        p = ws.c * k ** (-1.0 / alpha)
        brute = float(np.sum(-np.expm1(m * np.log1p(-p))))
        tail_hi = m * wt.tail_power_sum(ws, 1, 2_000_001)
        got = wt.mean_occupancy(ws, m)
        assert brute <= got + 1e-9
        assert got <= brute + tail_hi + 1e-9

    def test_mean_odd_occupancy_small_cases(self):
        ws = wt.make_weights(0.5)
        k = np.arange(1, 2_000_001, dtype=np.float64)
        p = ws.c * k ** (-1.0 / 0.5)
        for m in (1, 2, 7, 500):
            brute = float(np.sum(0.5 * (1.0 - (1.0 - 2.0 * p) ** m)))
            tail_hi = m * wt.tail_power_sum(ws, 1, 2_000_001)
            got = wt.mean_odd_occupancy(ws, m)
            assert abs(got - brute) <= tail_hi + 1e-9

    def test_one_throw(self):
        # a single throw occupies exactly one box, oddly
        ws = wt.make_weights(0.45)
        assert wt.mean_occupancy(ws, 1) == pytest.approx(1.0, abs=1e-9)
        assert wt.mean_odd_occupancy(ws, 1) == pytest.approx(1.0, abs=1e-9)


class TestCutoffs:
    @given(st.floats(0.15, 0.85), st.floats(1.0, 1e4), st.sampled_from([1e-6, 1e-9]))
    @settings(max_examples=30, deadline=None)
    def test_signed_cutoff_meets_rms_target(self, alpha, u, tol):
        ws = wt.make_weights(alpha, tail_tol=tol)
        k = wt.signed_cutoff(ws, u)
        assert 1 <= k <= wt.MAX_CUTOFF
        if k < wt.MAX_CUTOFF:
            # the neglected terms start at k+1
            assert wt.rms_tail_bound(ws, u, k + 1) <= tol * (1.0 + 1e-12)

    def test_cutoff_grows_with_horizon(self):
        ws = wt.make_weights(0.5)
        ks = [wt.signed_cutoff(ws, u) for u in (1.0, 1e2, 1e4)]
        assert ks[0] <= ks[1] <= ks[2]
