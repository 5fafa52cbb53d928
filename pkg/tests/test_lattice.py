"""Unit tests for the lattice normalization and point-counting module."""

import random
from fractions import Fraction

import pytest

from diophlab.certified import parse_vector
from diophlab.counting import CountQuery, count_Q
from diophlab.errors import PreconditionViolated
from diophlab.lattice import (
    build_lattice,
    count_lattice_points,
    dual_short_vector,
    verify_nalpha_bound,
)


class TestSpec:
    def test_determinant_contains_one(self):
        spec = build_lattice(parse_vector("sqrt2m1"), 1000, Fraction(1, 10))
        det = spec.det_enclosure()
        assert det.lower <= 1 <= det.upper

    def test_R_enclosures_overlap(self):
        spec = build_lattice(parse_vector("golden,sqrt2m1"), 500, Fraction(1, 7))
        R = spec.R_enclosure()
        assert R.lower <= R.upper

    def test_t_positive(self):
        spec = build_lattice(parse_vector("1/3"), 100, Fraction(1, 4))
        assert spec.t_enclosure().lower > 0

    def test_delta_domain(self):
        with pytest.raises(PreconditionViolated):
            build_lattice(parse_vector("1/3"), 100, Fraction(3, 2))


class TestCountingIdentity:
    """|{r in Lambda : |r|_inf < R}| = 2*|{0 < q < N : ||qx|| < delta}| + 1
    whenever delta < 1/2 (the origin plus +/- pairs)."""

    @pytest.mark.parametrize("xlit,N,delta", [
        ("sqrt2m1", 200, Fraction(1, 5)),
        ("golden", 300, Fraction(1, 10)),
        ("golden,sqrt2m1", 150, Fraction(1, 4)),
        ("1/7", 100, Fraction(2, 7)),
    ])
    def test_identity(self, xlit, N, delta):
        x = parse_vector(xlit)
        spec = build_lattice(x, N, delta)
        lat = count_lattice_points(spec)
        qcount = count_Q(CountQuery(x, delta, 0, N - 1)).count
        assert lat == 2 * qcount + 1

    def test_identity_randomized(self):
        rng = random.Random(7)
        for _ in range(15):
            num = rng.randint(1, 40)
            den = rng.randint(num + 1, 90)
            delta = Fraction(rng.randint(1, 19), 40)
            N = rng.randint(20, 400)
            x = parse_vector(f"{num}/{den}")
            spec = build_lattice(x, N, delta)
            assert count_lattice_points(spec) == 2 * count_Q(
                CountQuery(x, delta, 0, N - 1)
            ).count + 1


class TestDualSearch:
    def test_finds_witness(self):
        spec = build_lattice(parse_vector("sqrt2m1"), 100, Fraction(1, 10))
        dual = dual_short_vector(spec)
        assert dual is not None
        assert any(dual.q_part) or dual.p_part

    def test_witness_is_short(self):
        spec = build_lattice(parse_vector("golden"), 50, Fraction(1, 8))
        dual = dual_short_vector(spec, search_bound=8)
        assert dual is not None
        assert dual.image_upper <= Fraction(8, 50)


class TestNalphaBound:
    def test_boundary_delta(self):
        # tau = 2, N = 100: delta = N^(-1/2) = 1/10 sits exactly on the
        # inclusive precondition boundary
        res = verify_nalpha_bound(
            parse_vector("1/2"), Fraction(2), 100, Fraction(1, 10)
        )
        assert res.passed is not None

    def test_quadratic_passes(self):
        res = verify_nalpha_bound(
            parse_vector("sqrt2m1"), Fraction(3, 2), 10 ** 4, Fraction(1, 21)
        )
        assert res.passed

    def test_precondition_rejected(self):
        with pytest.raises(PreconditionViolated):
            verify_nalpha_bound(
                parse_vector("sqrt2m1"), Fraction(3), 100, Fraction(1, 100)
            )
