"""Empirical measure probes on fibers {x} x [0,1]^k.

The theorems being probed are measure-theoretic ("almost every y is
psi-approximable"), so the probes here are finite truncations: a point y
counts as witnessed when some q in (Q0, Q_max] satisfies
||q*(x, y)|| < psi(q) in the sup norm.  The x-part of that test does not
depend on y, so the qualifying q (those with ||q*x|| < psi(q)) are computed
once by the counting engine and shared across all samples.  Witness sets
nest in (Q0, Q_max], which makes the reported fraction nondecreasing in
Q_max and nonincreasing in Q0 pointwise per sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .certified import (
    PRECISION_CAP,
    PRECISION_DEFAULT,
    RealVector,
    Threshold,
)
from .counting import SCAN_BUDGET_DEFAULT, partial_series, qualifying_q
from .errors import PreconditionViolated
from .psi import ApproxFunction, PhiPsi

SEED_DEFAULT = 20260826

# Float distances carry rounding error of a few ulps of q; comparisons
# within this guard of the threshold are re-done in exact arithmetic.
_FLOAT_GUARD = 2.0 ** -44


@dataclass(frozen=True)
class MeasureExperiment:
    """A truncated approximability probe on the fiber {x} x [0,1]^k."""

    x: RealVector
    psi: ApproxFunction
    d: int
    k: int
    Q_max: int
    sampling: str = "grid"  # "grid" | "monte-carlo"
    n_points: int = 10_000
    seed: Optional[int] = None
    Q0: int = 0

    def __post_init__(self) -> None:
        if self.d != len(self.x.coords) + self.k:
            raise PreconditionViolated(
                f"d={self.d} must equal dim(x)={len(self.x.coords)} + k={self.k}"
            )
        if self.k < 1 or self.Q_max < 1 or self.Q0 < 0 or self.n_points < 1:
            raise PreconditionViolated("k, Q_max, n_points positive; Q0 >= 0")
        if self.sampling not in ("grid", "monte-carlo"):
            raise PreconditionViolated(f"unknown sampling {self.sampling!r}")
        if self.sampling == "monte-carlo" and self.seed is None:
            raise PreconditionViolated("monte-carlo sampling requires a seed")


@dataclass(frozen=True)
class FractionReport:
    """Witness statistics over the sampled points."""

    fraction: float
    witness_counts: np.ndarray  # per-point number of witnessing q
    first_witness_q: np.ndarray  # 0 when unwitnessed
    points: np.ndarray  # (n, k) float coordinates of the samples
    n_points: int
    Q0: int
    Q_max: int
    flagged: int  # comparisons left undecided at the precision cap
    qualifying_count: int


def sample_points(exp: MeasureExperiment) -> Tuple[np.ndarray, List[Tuple[Fraction, ...]]]:
    """Sample locations as floats plus their exact rational values.

    Grid points are i/(m+1) per axis with both endpoints excluded; Monte
    Carlo points are uniform draws whose float values are themselves exact
    dyadic rationals, so borderline comparisons stay decidable either way.
    """
    k = exp.k
    if exp.sampling == "grid":
        side = max(1, round(exp.n_points ** (1.0 / k)))
        denom = side + 1
        axis = [Fraction(i, denom) for i in range(1, side + 1)]
        fracs = [tuple(p) for p in product(axis, repeat=k)]
        pts = np.array([[float(c) for c in p] for p in fracs], dtype=np.float64)
        return pts, fracs
    rng = np.random.default_rng(np.random.SeedSequence([exp.seed]))
    pts = rng.random((exp.n_points, k))
    fracs = [tuple(Fraction(float(v)) for v in row) for row in pts]
    return pts, fracs


def _exact_decision(
    y_frac: Tuple[Fraction, ...],
    q: int,
    thr: Threshold,
    precision: int,
    cap: int,
) -> Optional[bool]:
    """Exact ||q*y|| < threshold, or None if undecidable within cap."""
    dmax = Fraction(0)
    for yf in y_frac:
        t = q * yf
        n = (2 * t.numerator + t.denominator) // (2 * t.denominator)
        dmax = max(dmax, abs(t - n))
    if thr.exact is not None:
        return dmax < thr.exact
    prec = precision
    while prec <= cap:
        lo, hi = thr.enclosure(prec)
        if dmax < lo:
            return True
        if dmax >= hi:
            return False
        prec *= 2
    return None


def _witness_scan(
    x: RealVector,
    psi: ApproxFunction,
    Q0: int,
    Q_max: int,
    pts: np.ndarray,
    fracs: Sequence[Tuple[Fraction, ...]],
    precision: int,
    cap: int,
    scan_budget: int,
) -> Tuple[np.ndarray, np.ndarray, int, int]:
    """Per-point witness counts and first witness over q in (Q0, Q_max]."""
    quals = qualifying_q(x, psi, Q0, Q_max, precision, cap, scan_budget)
    n = pts.shape[0]
    counts = np.zeros(n, dtype=np.int64)
    first = np.zeros(n, dtype=np.int64)
    flagged = 0
    for q in quals.tolist():
        thr = psi.threshold_at(q)
        lo, hi = thr.enclosure(precision)
        guard = q * _FLOAT_GUARD
        t = q * pts
        dist = np.abs(t - np.rint(t)).max(axis=1)
        sure = dist < float(lo) - guard
        maybe = np.nonzero(~sure & (dist < float(hi) + guard))[0]
        mask = sure
        for idx in maybe:
            verdict = _exact_decision(fracs[idx], q, thr, precision, cap)
            if verdict is None:
                flagged += 1  # undecided: counted as non-witness
            elif verdict:
                mask[idx] = True
        counts += mask
        first = np.where(mask & (first == 0), q, first)
    return counts, first, flagged, len(quals)


def approximable_fraction(
    exp: MeasureExperiment,
    precision: int = PRECISION_DEFAULT,
    cap: int = PRECISION_CAP,
    scan_budget: int = SCAN_BUDGET_DEFAULT,
) -> FractionReport:
    """Fraction of sampled y with a witness q in (Q0, Q_max]."""
    pts, fracs = sample_points(exp)
    counts, first, flagged, nqual = _witness_scan(
        exp.x, exp.psi, exp.Q0, exp.Q_max, pts, fracs, precision, cap,
        scan_budget,
    )
    n = pts.shape[0]
    return FractionReport(
        fraction=float(np.count_nonzero(first) / n),
        witness_counts=counts,
        first_witness_q=first,
        points=pts,
        n_points=n,
        Q0=exp.Q0,
        Q_max=exp.Q_max,
        flagged=flagged,
        qualifying_count=nqual,
    )


def fraction_profile(
    exp: MeasureExperiment,
    checkpoints: Sequence[int],
    precision: int = PRECISION_DEFAULT,
    cap: int = PRECISION_CAP,
    scan_budget: int = SCAN_BUDGET_DEFAULT,
) -> List[Tuple[int, float]]:
    """Fractions at several Q_max checkpoints from a single scan.

    A point counts at checkpoint Q iff its first witness is <= Q, so the
    profile is nondecreasing by construction (witness sets nest).
    """
    cps = sorted(set(int(c) for c in checkpoints))
    if not cps or cps[0] <= exp.Q0 or cps[-1] > exp.Q_max:
        raise PreconditionViolated("checkpoints must lie in (Q0, Q_max]")
    rep = approximable_fraction(exp, precision, cap, scan_budget)
    first = rep.first_witness_q
    return [
        (cp, float(np.count_nonzero((first > 0) & (first <= cp)) / rep.n_points))
        for cp in cps
    ]


@dataclass(frozen=True)
class PhiContrastReport:
    """Empirical phi-witness fraction against its rigorous union bound."""

    empirical_fraction: float
    union_bound: float
    sigma: float  # binomial sampling error of the empirical fraction
    n_points: int
    Q0: int
    Q_max: int
    qualifying_count: int
    flagged: int


def phi_contrast(
    x: RealVector,
    d: int,
    Q0: int,
    Q_max: int,
    sampling: str = "grid",
    n_points: int = 10_000,
    seed: Optional[int] = None,
    precision: int = PRECISION_DEFAULT,
    cap: int = PRECISION_CAP,
    scan_budget: int = SCAN_BUDGET_DEFAULT,
) -> PhiContrastReport:
    """Probe the safety function phi(q) = (q (log q)^2)^(-1/d).

    The union bound sums 2*phi(q)*(q+1)/q over qualifying q in (Q0, Q_max]:
    each such q contributes at most q+1 balls of radius phi(q)/q inside
    [0,1].  The sum uses certified upper endpoints, so it is a rigorous
    upper bound for the measure of the witnessed set; the empirical
    fraction must fall below it up to sampling error.

    Grid sampling needs spacing well below the ball radii, or quantization
    inflates the union (each thin ball family picks up whole grid cells);
    10^4 points is adequate for Q0 >= 10^3 in dimension 2.
    """
    if Q0 < 2:
        raise PreconditionViolated("phi contrast needs Q0 >= 2")
    if Q_max < Q0:
        raise PreconditionViolated("need Q_max >= Q0")
    k = d - len(x.coords)
    if k < 1:
        raise PreconditionViolated("need d > dim(x)")
    phi = PhiPsi(d)
    if Q_max == Q0:
        return PhiContrastReport(0.0, 0.0, 0.0, 0, Q0, Q_max, 0, 0)
    exp = MeasureExperiment(
        x=x, psi=phi, d=d, k=k, Q_max=Q_max, sampling=sampling,
        n_points=n_points, seed=seed, Q0=Q0,
    )
    rep = approximable_fraction(exp, precision, cap, scan_budget)
    quals = qualifying_q(x, phi, Q0, Q_max, precision, cap, scan_budget)
    bound = Fraction(0)
    for q in quals.tolist():
        _, hi = phi.enclosure(q, precision)
        bound += 2 * hi * Fraction(q + 1, q)
    f = rep.fraction
    sigma = math.sqrt(max(f * (1.0 - f), 1.0 / rep.n_points) / rep.n_points)
    return PhiContrastReport(
        empirical_fraction=f,
        union_bound=float(bound),
        sigma=sigma,
        n_points=rep.n_points,
        Q0=Q0,
        Q_max=Q_max,
        qualifying_count=len(quals),
        flagged=rep.flagged,
    )


def subspace_fraction(
    exp: MeasureExperiment,
    precision: int = PRECISION_DEFAULT,
    cap: int = PRECISION_CAP,
    scan_budget: int = SCAN_BUDGET_DEFAULT,
) -> Tuple[FractionReport, List[Tuple[int, Union[Fraction, float]]]]:
    """approximable_fraction on [0,1]^k (k >= 2) paired with the partial
    sums of sum psi(q)^k over qualifying q, so the series divergence and
    the empirical fraction are reported together."""
    if exp.k < 2:
        raise PreconditionViolated("subspace probe needs fiber dimension k >= 2")
    rep = approximable_fraction(exp, precision, cap, scan_budget)
    series = partial_series(exp.x, exp.psi, exp.k, exp.Q_max, precision, scan_budget)
    return rep, series


def point_rows(rep: FractionReport) -> List[List[str]]:
    """CSV rows (y..., witness_count, first_witness_q) plus a summary row."""
    rows = [
        [*(repr(float(c)) for c in rep.points[i]),
         str(int(rep.witness_counts[i])),
         str(int(rep.first_witness_q[i]))]
        for i in range(rep.n_points)
    ]
    rows.append([
        "summary", repr(rep.fraction), str(rep.Q0), str(rep.Q_max),
        str(rep.n_points),
    ])
    return rows
