"""Unit tests for the empirical measure probes."""

from fractions import Fraction

import numpy as np
import pytest

from diophlab.certified import parse_vector
from diophlab.errors import PreconditionViolated
from diophlab.measure_lab import (
    MeasureExperiment,
    approximable_fraction,
    fraction_profile,
    phi_contrast,
    point_rows,
    sample_points,
    subspace_fraction,
)
from diophlab.psi import ConstantPsi, MaxPsi, PhiPsi, parse_psi

X = parse_vector("sqrt2m1")


def make_exp(**kw):
    base = dict(x=X, psi=parse_psi("q^-0.5"), d=2, k=1, Q_max=1000,
                sampling="grid", n_points=200)
    base.update(kw)
    return MeasureExperiment(**base)


class TestExperiment:
    def test_dimension_invariant(self):
        with pytest.raises(PreconditionViolated):
            make_exp(d=3)

    def test_mc_needs_seed(self):
        with pytest.raises(PreconditionViolated):
            make_exp(sampling="monte-carlo")

    def test_grid_excludes_endpoints(self):
        pts, fracs = sample_points(make_exp(n_points=10))
        assert pts.min() > 0 and pts.max() < 1
        assert all(0 < f < 1 for row in fracs for f in row)

    def test_grid_square(self):
        exp = make_exp(d=3, k=2, n_points=100)
        pts, _ = sample_points(exp)
        assert pts.shape == (100, 2)


class TestApproximableFraction:
    def test_threshold_above_half_saturates(self):
        rep = approximable_fraction(make_exp(psi=ConstantPsi(Fraction(6, 10))))
        assert rep.fraction == 1.0

    def test_zero_psi(self):
        rep = approximable_fraction(make_exp(psi=ConstantPsi(Fraction(0))))
        assert rep.fraction == 0.0

    def test_profile_nondecreasing(self):
        exp = make_exp(Q_max=10 ** 4, n_points=500)
        prof = fraction_profile(exp, [100, 1000, 10 ** 4])
        vals = [f for _, f in prof]
        assert vals == sorted(vals)

    def test_monotone_in_Q0_pointwise(self):
        rep_all = approximable_fraction(make_exp(Q0=0))
        rep_tail = approximable_fraction(make_exp(Q0=50))
        assert (rep_tail.witness_counts <= rep_all.witness_counts).all()

    def test_mc_deterministic(self):
        exp = make_exp(sampling="monte-carlo", seed=123, n_points=300)
        a = approximable_fraction(exp)
        b = approximable_fraction(exp)
        assert a.fraction == b.fraction
        assert (a.first_witness_q == b.first_witness_q).all()

    def test_point_rows_shape(self):
        rep = approximable_fraction(make_exp(n_points=20))
        rows = point_rows(rep)
        assert len(rows) == rep.n_points + 1
        assert rows[-1][0] == "summary"


class TestPhiContrast:
    def test_bound_respected(self):
        rep = phi_contrast(X, 2, 1000, 10 ** 5, "grid", 10 ** 4)
        assert rep.empirical_fraction <= rep.union_bound + 3 * rep.sigma
        assert rep.union_bound < 0.5

    def test_empty_range(self):
        rep = phi_contrast(X, 2, 1000, 1000)
        assert rep.empirical_fraction == 0.0 and rep.union_bound == 0.0

    def test_q0_guard(self):
        with pytest.raises(PreconditionViolated):
            phi_contrast(X, 2, 1, 100)


class TestSubspace:
    def test_needs_k2(self):
        with pytest.raises(PreconditionViolated):
            subspace_fraction(make_exp())

    def test_divergent_case(self):
        exp = make_exp(psi=parse_psi("q^-1/3"), d=3, k=2, Q_max=2000,
                       n_points=100)
        rep, series = subspace_fraction(exp)
        assert rep.fraction >= 0.9
        vals = [float(v) for _, v in series]
        assert vals == sorted(vals) and vals[-1] > vals[0]


class TestPsiBarDecomposition:
    def test_set_identity(self):
        """Every psi-bar-witnessed point that is not phi-witnessed is
        psi-witnessed: exact per sample, since witness sets are unions."""
        psi = parse_psi("q^-0.5")
        phi = PhiPsi(2)
        bar = MaxPsi(psi, phi)
        kw = dict(x=X, d=2, k=1, Q_max=2000, sampling="grid", n_points=400,
                  Q0=10)
        f_bar = approximable_fraction(MeasureExperiment(psi=bar, **kw))
        f_phi = approximable_fraction(MeasureExperiment(psi=phi, **kw))
        f_psi = approximable_fraction(MeasureExperiment(psi=psi, **kw))
        bar_w = f_bar.first_witness_q > 0
        phi_w = f_phi.first_witness_q > 0
        psi_w = f_psi.first_witness_q > 0
        assert (np.logical_and(bar_w, ~phi_w) <= psi_w).all()
