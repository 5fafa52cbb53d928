"""Unit tests for the certified real arithmetic core."""

import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diophlab.certified import (
    CertifiedValue,
    RealExpr,
    RealVector,
    Threshold,
    algebraic_power,
    certify_less,
    dist_less_than,
    float_with_error,
    nearest_int_dist,
    parse_real,
    parse_vector,
    sqrt_enclosure,
    sup_norm_dist,
)
from diophlab.errors import LiteralParseError


class TestParsing:
    def test_rational(self):
        assert parse_real("3/7").exact_fraction() == Fraction(3, 7)
        assert parse_real("-2/5").exact_fraction() == Fraction(-2, 5)

    def test_decimal(self):
        assert parse_real("0.25").exact_fraction() == Fraction(1, 4)
        assert parse_real("-1.5").exact_fraction() == Fraction(-3, 2)

    def test_quadratic(self):
        e = parse_real("-1+1*sqrt(2)")
        assert e.a == -1 and e.b == 1 and e.c == 2
        assert not e.is_rational

    def test_presets(self):
        s = parse_real("sqrt2m1")
        assert (s.a, s.b, s.c) == (-1, 1, 2)
        g = parse_real("golden")
        lo, hi = g.enclosure(64)
        mid = float((lo + hi) / 2)
        assert abs(mid - 0.6180339887498949) < 1e-9 or abs(mid - 1.618033988749895) < 1e-9

    def test_liouville_is_rational(self):
        e = parse_real("liouville10(3)")
        assert e.is_rational
        assert e.exact_fraction() == (
            Fraction(1, 10) + Fraction(1, 100) + Fraction(1, 10 ** 6)
        )

    def test_vector(self):
        v = parse_vector("golden,1/2")
        assert v.dim == 2
        assert v.coords[1].exact_fraction() == Fraction(1, 2)

    @pytest.mark.parametrize("bad", ["", "sqrt(", "1//2", "frobnicate", "1+2"])
    def test_parse_errors(self, bad):
        with pytest.raises(LiteralParseError):
            parse_real(bad)


class TestEnclosures:
    def test_sqrt_enclosure_brackets(self):
        lo, hi = sqrt_enclosure(2, 128)
        assert lo < hi
        assert lo * lo <= 2 <= hi * hi

    def test_sqrt_enclosure_shrinks(self):
        w1 = (lambda e: e[1] - e[0])(sqrt_enclosure(3, 32))
        w2 = (lambda e: e[1] - e[0])(sqrt_enclosure(3, 256))
        assert w2 < w1

    def test_expr_enclosure_contains_float(self):
        e = parse_real("sqrt2m1")
        lo, hi = e.enclosure(128)
        assert lo < hi and hi - lo < Fraction(1, 1 << 100)
        assert abs(float(lo) - (math.sqrt(2) - 1)) < 1e-14

    def test_float_with_error(self):
        mid, err = float_with_error(parse_real("golden"))
        assert err < 1e-15
        assert abs(mid - (math.sqrt(5) - 1) / 2) < 1e-9 or abs(
            mid - (math.sqrt(5) + 1) / 2
        ) < 1e-9


class TestNearestIntDist:
    def test_rational_exact(self):
        cv = nearest_int_dist(RealExpr.rational(Fraction(7, 3)))
        assert cv.lower == cv.upper == Fraction(1, 3)

    def test_half(self):
        cv = nearest_int_dist(RealExpr.rational(Fraction(5, 2)))
        assert cv.lower == Fraction(1, 2)

    @given(st.integers(-10 ** 6, 10 ** 6), st.integers(1, 10 ** 4))
    @settings(max_examples=200, deadline=None)
    def test_matches_direct_formula(self, p, q):
        v = Fraction(p, q)
        cv = nearest_int_dist(RealExpr.rational(v))
        frac = v - math.floor(v)
        assert cv.lower == min(frac, 1 - frac)

    def test_irrational_certified(self):
        e = parse_real("sqrt2m1").scale(5)  # 5*(sqrt(2)-1) = 2.071...
        cv = nearest_int_dist(e)
        assert abs(float(cv.lower) - (5 * math.sqrt(2) - 7)) < 1e-12
        assert cv.width <= Fraction(1, 1 << 64)

    def test_sup_norm(self):
        v = parse_vector("1/3,1/4")
        cv = sup_norm_dist(v, 1)
        assert cv.lower == Fraction(1, 3)


class TestThresholds:
    def test_algebraic_power_exact_case(self):
        t = algebraic_power(1000, Fraction(-2, 3))
        assert t.exact == Fraction(1, 100)

    def test_algebraic_power_enclosure(self):
        t = algebraic_power(10, Fraction(-1, 2))
        lo, hi = t.enclosure(128)
        assert lo < hi
        assert lo < Fraction(3163, 10000) and hi > Fraction(3162, 10000)  # 10^-1/2 = 0.3162...

    def test_certify_less(self):
        left = Threshold.from_fraction(Fraction(1, 3))
        assert certify_less(left.enclosure, Threshold.from_fraction(Fraction(1, 2)).enclosure, 64, 256)
        assert not certify_less(left.enclosure, Threshold.from_fraction(Fraction(1, 4)).enclosure, 64, 256)

    def test_dist_less_than(self):
        v = parse_vector("1/3")
        assert dist_less_than(v, 1, Threshold.from_fraction(Fraction(2, 5)))
        assert not dist_less_than(v, 1, Threshold.from_fraction(Fraction(1, 3)))


class TestCertifiedValue:
    def test_ordering_enforced(self):
        with pytest.raises(ValueError):
            CertifiedValue(Fraction(1), Fraction(0), 64)

    def test_point(self):
        cv = CertifiedValue.point(Fraction(1, 7))
        assert cv.exact and cv.width == 0
