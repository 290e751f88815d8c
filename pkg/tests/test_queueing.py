from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from evalloc.queueing import (
    StationQueueParams,
    UnstableLoadError,
    dev_mmc_simulate,
    erlang_p0,
    expected_in_system,
    load_point,
    saturating_outflow,
    sojourn_time,
)
from oracles import erlang_direct


def P(c, mu=1.0):
    return StationQueueParams(c, mu)


class TestErlang:
    def test_empty_system(self):
        assert erlang_p0(P(1), 0.0) == 1.0

    def test_mm1_p0(self):
        assert erlang_p0(P(1), 0.5) == pytest.approx(0.5, rel=1e-15)

    def test_two_servers_hand_value(self):
        p0, L = erlang_direct(2, 1, 1)
        assert p0 == Fraction(1, 3) and L == Fraction(4, 3)
        assert erlang_p0(P(2), 1.0) == pytest.approx(1 / 3, rel=1e-15)
        assert expected_in_system(P(2), 1.0) == pytest.approx(4 / 3, rel=1e-15)

    def test_mm1_in_system(self):
        assert expected_in_system(P(1), 0.5) == pytest.approx(1.0, rel=1e-15)

    def test_no_arrivals(self):
        assert expected_in_system(P(3), 0.0) == 0.0
        assert expected_in_system(P(3), 1e-12) == pytest.approx(1e-12, rel=1e-6)

    @pytest.mark.parametrize("c", [1, 2, 5, 17, 40, 64])
    @pytest.mark.parametrize("util", [Fraction(1, 10), Fraction(1, 2), Fraction(9, 10), Fraction(99, 100)])
    def test_matches_exact_rational(self, c, util):
        mu = Fraction(3, 2)
        lam = util * c * mu
        p0, L = erlang_direct(c, mu, lam)
        params = P(c, float(mu))
        assert erlang_p0(params, float(lam)) == pytest.approx(float(p0), rel=1e-12)
        assert expected_in_system(params, float(lam)) == pytest.approx(float(L), rel=1e-12)

    def test_mm1_closed_form_sweep(self):
        for rho in np.arange(1, 10) / 10:
            assert expected_in_system(P(1), rho) == pytest.approx(rho / (1 - rho), rel=1e-12, abs=0)

    @pytest.mark.parametrize("lam", [2.0, 2.5])
    def test_unstable(self, lam):
        with pytest.raises(UnstableLoadError):
            erlang_p0(P(2), lam)
        with pytest.raises(UnstableLoadError):
            expected_in_system(P(2), lam)

    def test_negative_rate(self):
        with pytest.raises(ValueError):
            erlang_p0(P(1), -0.1)

    def test_p0_decreasing_and_in_unit_interval(self):
        for c in (1, 3, 8):
            lams = np.linspace(0, c * 0.999, 200)
            p0 = np.array([erlang_p0(P(c), l) for l in lams])
            assert np.all(p0 > 0) and np.all(p0 <= 1)
            assert np.all(np.diff(p0) < 0)

    def test_in_system_increasing_convex(self):
        for c in (1, 2, 4):
            h = 1e-3 * c
            lams = np.arange(h, c * 0.99 - h, h)
            L = np.array([expected_in_system(P(c), l) for l in lams])
            assert np.all(np.diff(L) > 0)
            second = L[2:] - 2 * L[1:-1] + L[:-2]
            assert np.all(second > -1e-9)


def test_load_point():
    lp = load_point(P(4, 2.0), 6.0)
    assert lp.offered_load == 3.0 and lp.utilization == 0.75


def test_params_validation():
    with pytest.raises(ValueError):
        StationQueueParams(0, 1.0)
    with pytest.raises(ValueError):
        StationQueueParams(1, 0.0)


class TestOutflow:
    def test_examples(self):
        assert saturating_outflow(P(2), 0.0) == 0.0
        assert saturating_outflow(P(2), 1.0) == 1.0
        assert saturating_outflow(P(3, 0.5), 9.0) == pytest.approx(1.35, rel=1e-15)

    def test_negative(self):
        with pytest.raises(ValueError):
            saturating_outflow(P(1), -1.0)

    @given(st.integers(1, 20), st.floats(0.01, 50), st.floats(0, 1e6))
    def test_bounded_and_increasing(self, c, mu, x):
        p = P(c, mu)
        g = saturating_outflow(p, x)
        assert 0 <= g < p.capacity or (x > 1e15)
        assert saturating_outflow(p, x + 1.0) > g

    def test_slope_at_origin(self):
        p = P(3, 0.7)
        h = 1e-10
        slope = (saturating_outflow(p, h) - saturating_outflow(p, 0.0)) / h
        assert slope == pytest.approx(p.capacity, abs=1e-9)


class TestSojourn:
    def test_examples(self):
        assert sojourn_time(0.0, 123.0) == 0.0
        assert sojourn_time(0.0, 0.0) == 0.0
        assert sojourn_time(4.0, 2.0, 1e-6) == 2.0
        assert sojourn_time(4.0, 0.0, 1e-6) == pytest.approx(4e6, rel=1e-15)

    def test_domain(self):
        with pytest.raises(ValueError):
            sojourn_time(-1.0, 1.0)
        with pytest.raises(ValueError):
            sojourn_time(1.0, 1.0, 0.0)


class TestSimulator:
    def test_zero_rate(self):
        assert dev_mmc_simulate(P(2), 0.0, 1000.0, 1) == (0.0, 0.0)

    def test_deterministic(self):
        a = dev_mmc_simulate(P(2), 1.0, 2e4, 7)
        b = dev_mmc_simulate(P(2), 1.0, 2e4, 7)
        assert a == b
        assert dev_mmc_simulate(P(2), 1.0, 2e4, 8) != a

    def test_unstable(self):
        with pytest.raises(UnstableLoadError):
            dev_mmc_simulate(P(1), 1.0, 100.0, 0)

    def test_littles_law_inside_simulation(self):
        # Time-average count and per-customer sojourn are measured separately.
        L, W = dev_mmc_simulate(P(2), 1.2, 2e5, 3)
        assert L == pytest.approx(1.2 * W, rel=0.02)

    def test_mm1_short_run(self):
        L, W = dev_mmc_simulate(P(1), 0.5, 2e5, 11)
        assert L == pytest.approx(1.0, rel=0.05)
        assert W == pytest.approx(2.0, rel=0.05)
