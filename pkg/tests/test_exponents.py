"""Unit tests for the exponent estimators and transference checks."""

import math
from fractions import Fraction

import pytest

from diophlab.certified import parse_vector
from diophlab.errors import PreconditionViolated
from diophlab.exponents import (
    check_extension_monotonicity,
    check_transference,
    estimate_omega_D,
    estimate_omega_S,
    estimate_tau_D,
    vwa_witnesses,
)

INF = math.inf


class TestTauD:
    def test_golden_badly_approximable(self):
        est = estimate_tau_D(parse_vector("golden"), 10 ** 4)
        assert 1.0 <= est.value <= 1.05
        assert not est.is_exact_resonance

    def test_rational_resonates(self):
        est = estimate_tau_D(parse_vector("1/2"), 100)
        assert est.value == INF
        assert est.is_exact_resonance
        # witness n = 2*e_1 kills the form exactly
        assert est.best_witnesses[0][0] == (2,)

    def test_rational_coordinate_resonates_in_pair(self):
        est = estimate_tau_D(parse_vector("golden,3/7"), 100)
        assert est.value == INF and est.is_exact_resonance

    def test_dirichlet_floor(self):
        # the estimate is clamped at the Dirichlet exponent ell
        est = estimate_tau_D(parse_vector("golden,sqrt2m1"), 500)
        assert est.value >= 2.0

    def test_height_guard(self):
        with pytest.raises(PreconditionViolated):
            estimate_tau_D(parse_vector("golden"), 1)


class TestOmegaD:
    def test_shift_identity(self):
        x = parse_vector("golden")
        tau = estimate_tau_D(x, 2000)
        om = estimate_omega_D(x, 2000)
        if tau.value != INF:
            assert om.value == pytest.approx(max(tau.value - 1, 0.0))

    def test_resonant(self):
        assert estimate_omega_D(parse_vector("1/3"), 100).value == INF


class TestOmegaS:
    def test_all_rational_resonates(self):
        est = estimate_omega_S(parse_vector("1/2,1/3"), 100)
        assert est.value == INF
        # q = lcm(2,3) lands exactly on the integer grid
        assert est.best_witnesses[0][0] == (6,)

    def test_golden_near_zero(self):
        est = estimate_omega_S(parse_vector("golden"), 10 ** 4)
        assert 0.0 <= est.value <= 0.2

    def test_nonnegative_clamp(self):
        est = estimate_omega_S(parse_vector("golden,sqrt2m1"), 2000)
        assert est.value >= 0.0


class TestTransference:
    def test_sandwich_finite(self):
        res = check_transference(1.0, 0.3, 2)
        assert res.passed  # 1/(4+1) = 0.2 <= 0.3 <= 1.0

    def test_upper_violated(self):
        assert not check_transference(0.1, 0.5, 2).passed

    def test_lower_violated(self):
        assert not check_transference(3.0, 0.05, 2).passed

    def test_infinite_omega_D_d1(self):
        assert check_transference(INF, INF, 1).passed

    def test_infinite_omega_D_d2(self):
        # lower bound becomes 1/(d-1) = 1, upper vacuous
        assert check_transference(INF, 1.5, 2).passed
        assert not check_transference(INF, 0.5, 2).passed

    def test_slack(self):
        assert check_transference(1.0, 0.16, 2, slack=0.05).passed

    def test_preconditions(self):
        with pytest.raises(PreconditionViolated):
            check_transference(-1.0, 0.0, 2)


class TestVwa:
    def test_rational_vector_witnesses(self):
        # multiples of the lcm are exact hits at any exponent
        qs = vwa_witnesses(parse_vector("1/2,1/3"), Fraction(1, 10), 100)
        assert 6 in qs and 12 in qs

    def test_golden_has_none_at_large_eps(self):
        qs = vwa_witnesses(parse_vector("golden"), Fraction(1), 2000)
        # golden is badly approximable: ||q*g|| ~ 1/(sqrt(5)q), so the
        # q^-2 threshold admits only tiny q
        assert qs == [1, 2]

    def test_eps_positive(self):
        with pytest.raises(PreconditionViolated):
            vwa_witnesses(parse_vector("golden"), Fraction(0), 100)


class TestExtension:
    def test_monotone_under_extension(self):
        res = check_extension_monotonicity(
            parse_vector("golden"), parse_vector("sqrt2m1"), 400,
        )
        assert res.passed
