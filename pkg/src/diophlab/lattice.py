"""Unimodular lattice machinery behind the counting upper bound.

Points of the lattice are images of integer vectors (m, q) under the map
(m, q) -> (e^(t/l) * (m - q*x), e^(-t) * q), so membership in the open
sup-ball of radius R = e^(t/l)*delta = e^(-t)*N is equivalent to the pair
of conditions |m - q*x|_inf < delta and |q| < N.  Counting is done directly
on that equivalence; no basis reduction is performed.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Tuple, Union

from .certified import (
    PRECISION_CAP,
    PRECISION_DEFAULT,
    CertifiedValue,
    RealExpr,
    RealVector,
    Threshold,
    algebraic_power,
    mpfr_enclosure,
)
from .counting import CheckResult, CountQuery, count_Q
from .errors import BudgetExceeded, PreconditionViolated, PrecisionExhausted

Rat = Union[int, Fraction]

N_MIN_DEFAULT = 1000
SEARCH_BOUND_DEFAULT = 8
CELL_BUDGET_DEFAULT = 10 ** 7


@dataclass(frozen=True)
class LatticeSpec:
    x: RealVector
    N: int
    delta: Fraction

    def __post_init__(self) -> None:
        if self.N < 1:
            raise PreconditionViolated("need N >= 1")
        if not 0 < self.delta < 1:
            raise PreconditionViolated("need 0 < delta < 1")

    @property
    def ell(self) -> int:
        return self.x.dim

    def t_enclosure(self, precision: int = PRECISION_DEFAULT) -> CertifiedValue:
        """t = log(N/delta) / (1 + 1/ell)."""
        import gmpy2

        ratio = Fraction(self.N) / self.delta
        lo, hi = mpfr_enclosure(
            lambda: gmpy2.log(gmpy2.mpfr(ratio.numerator) / gmpy2.mpfr(ratio.denominator))
            / (1 + gmpy2.mpfr(1) / self.ell),
            precision,
        )
        return CertifiedValue(lo, hi, precision)

    def R_enclosures(
        self, precision: int = PRECISION_DEFAULT
    ) -> Tuple[CertifiedValue, CertifiedValue]:
        """Both defining evaluations of R; they must overlap."""
        t = self.t_enclosure(precision)
        ell = self.ell
        # R = exp(t/ell) * delta is increasing in t
        a_lo = _exp_lower(t.lower / ell, precision) * self.delta
        a_hi = _exp_upper(t.upper / ell, precision) * self.delta
        # R = exp(-t) * N is decreasing in t
        b_lo = _exp_lower(-t.upper, precision) * self.N
        b_hi = _exp_upper(-t.lower, precision) * self.N
        return (
            CertifiedValue(a_lo, a_hi, precision),
            CertifiedValue(b_lo, b_hi, precision),
        )

    def R_enclosure(self, precision: int = PRECISION_DEFAULT) -> CertifiedValue:
        a, b = self.R_enclosures(precision)
        lo, hi = max(a.lower, b.lower), min(a.upper, b.upper)
        if lo > hi:
            raise PrecisionExhausted("the two R evaluations produced disjoint enclosures")
        return CertifiedValue(lo, hi, precision)

    def det_enclosure(self, precision: int = PRECISION_DEFAULT) -> CertifiedValue:
        """Enclosure of det(g_t u_x) = exp(t/ell)^ell * exp(-t); contains 1."""
        t = self.t_enclosure(precision)
        ell = self.ell
        lo = _exp_lower(ell * (t.lower / ell) - t.upper, precision)
        hi = _exp_upper(ell * (t.upper / ell) - t.lower, precision)
        return CertifiedValue(lo, hi, precision)


@dataclass(frozen=True)
class DualVector:
    q_part: Tuple[int, ...]
    p_part: int
    image_lower: Fraction
    image_upper: Fraction

    def __post_init__(self) -> None:
        if self.p_part == 0 and not any(self.q_part):
            raise ValueError("dual vector must be nonzero")


def build_lattice(x: RealVector, N: int, delta: Rat) -> LatticeSpec:
    return LatticeSpec(x, N, Fraction(delta))


def _exp_lower(v: Fraction, precision: int) -> Fraction:
    import gmpy2

    return mpfr_enclosure(
        lambda: gmpy2.exp(gmpy2.mpfr(v.numerator) / gmpy2.mpfr(v.denominator)), precision
    )[0]


def _exp_upper(v: Fraction, precision: int) -> Fraction:
    import gmpy2

    return mpfr_enclosure(
        lambda: gmpy2.exp(gmpy2.mpfr(v.numerator) / gmpy2.mpfr(v.denominator)), precision
    )[1]


def _ints_in_open(lo: Fraction, hi: Fraction) -> int:
    """|{m in Z : lo < m < hi}| for exact rational endpoints."""
    if lo >= hi:
        return 0
    lo_i = math.floor(lo) + 1  # smallest integer > lo when lo is an integer
    if lo != math.floor(lo):
        lo_i = math.ceil(lo)
    hi_i = math.ceil(hi) - 1
    if hi != math.ceil(hi):
        hi_i = math.floor(hi)
    return max(0, hi_i - lo_i + 1)


def _coord_interval_count(
    coord: RealExpr,
    q: int,
    delta: Fraction,
    precision: int,
    cap: int,
) -> int:
    """|{m : |m - q*coord| < delta}| exactly, refining until determined."""
    if coord.is_rational:
        c = coord.a * q
        return _ints_in_open(c - delta, c + delta)
    prec = precision
    while prec <= cap:
        lo, hi = coord.scale(q).enclosure(prec)
        lo_count = _ints_in_open(hi - delta, lo + delta)
        hi_count = _ints_in_open(lo - delta, hi + delta)
        if lo_count == hi_count:
            return lo_count
        prec *= 2
    raise PrecisionExhausted(
        f"interval count undecided at q={q} with precision cap {cap}"
    )


def count_lattice_points(
    spec: LatticeSpec,
    precision: int = PRECISION_DEFAULT,
    cap: int = PRECISION_CAP,
    scan_budget: int = CELL_BUDGET_DEFAULT,
) -> int:
    """Exact number of lattice points in the open sup-ball of radius R.

    Enumerates |q| < N and multiplies per-coordinate counts of admissible
    integers m_i; the q <-> -q symmetry halves the scan.
    """
    if spec.N > scan_budget:
        raise BudgetExceeded(f"q-scan of size {spec.N} exceeds budget {scan_budget}")
    # q = 0: |m|_inf < delta < 1 forces m = 0
    total = 1
    for q in range(1, spec.N):
        per_q = 1
        for coord in spec.x.coords:
            n = _coord_interval_count(coord, q, spec.delta, precision, cap)
            if n == 0:
                per_q = 0
                break
            per_q *= n
        total += 2 * per_q
    return total


def dual_short_vector(
    spec: LatticeSpec,
    search_bound: Rat = SEARCH_BOUND_DEFAULT,
    precision: int = PRECISION_DEFAULT,
    cap: int = PRECISION_CAP,
    cell_budget: int = CELL_BUDGET_DEFAULT,
) -> Optional[DualVector]:
    """Search for a nonzero dual witness (q-vector, p) with
    |q|_inf <= search_bound/delta and |<q,x> + p| <= search_bound/N."""
    B = Fraction(search_bound)
    if B <= 0:
        raise PreconditionViolated("search_bound must be positive")
    q_cap = math.floor(B / spec.delta)
    ell = spec.ell
    cells = (2 * q_cap + 1) ** ell
    if cells > cell_budget:
        raise BudgetExceeded(
            f"dual enumeration over {cells} cells exceeds budget {cell_budget}"
        )
    p_tol = B / spec.N
    best: Optional[DualVector] = None
    best_gap: Optional[Fraction] = None
    for q_vec in itertools.product(range(-q_cap, q_cap + 1), repeat=ell):
        if not any(q_vec) and spec.N > B:
            # the only candidates are (0, p) with |p| >= 1 > search_bound/N
            continue
        inner = _inner_product(spec.x, q_vec)
        prec = precision
        while True:
            lo, hi = inner.enclosure(prec)
            p_min = math.ceil(-hi - p_tol)
            p_max = math.floor(-lo + p_tol)
            resolved = True
            for p in range(p_min, p_max + 1):
                if p == 0 and not any(q_vec):
                    continue
                img_lo = max(Fraction(0), lo + p, -(hi + p))
                img_hi = max(abs(lo + p), abs(hi + p))
                if img_hi <= p_tol:
                    if best_gap is None or img_hi < best_gap:
                        best = DualVector(q_vec, p, img_lo, img_hi)
                        best_gap = img_hi
                elif img_lo <= p_tol < img_hi and prec < cap:
                    resolved = False
            if resolved or prec >= cap:
                break
            prec *= 2
    return best


def _inner_product(x: RealVector, q_vec: Tuple[int, ...]) -> RealExpr:
    """<q, x> as a closed-form expression (requires shared radicand)."""
    a = Fraction(0)
    b = Fraction(0)
    c = 0
    for qi, coord in zip(q_vec, x.coords):
        a += qi * coord.a
        if coord.c != 0 and coord.b != 0:
            if c == 0:
                c = coord.c
            if coord.c != c:
                raise PreconditionViolated(
                    "dual search requires coordinates over a single radicand"
                )
            b += qi * coord.b
    if b == 0:
        c = 0
    return RealExpr.make(a, b, c)


def verify_nalpha_bound(
    x: RealVector,
    tau: Rat,
    N: int,
    delta: Rat,
    N_min: int = N_MIN_DEFAULT,
    precision: int = PRECISION_DEFAULT,
    cap: int = PRECISION_CAP,
) -> CheckResult:
    """Check |{q <= N : ||q*x|| < delta}| <= 4^(l+1) * N * delta^l.

    Requires delta >= N^(-1/tau) (inclusive); an asymptotic statement, so a
    failing comparison below N_min is reported as inconclusive.
    """
    delta = Fraction(delta)
    tau = Fraction(tau)
    if tau <= 0:
        raise PreconditionViolated("tau must be positive")
    floor_thr = algebraic_power(N, -1 / tau)
    if not _at_least(delta, floor_thr, precision, cap):
        raise PreconditionViolated(f"delta={delta} < N^(-1/tau) for N={N}, tau={tau}")
    rep = count_Q(CountQuery(x, delta, 0, N), precision, cap)
    ell = x.dim
    bound = Fraction(4) ** (ell + 1) * N * delta ** ell
    margin = bound - rep.count
    passed: Optional[bool] = rep.count <= bound
    detail = {"count": rep.count, "bound": float(bound), "N": N, "delta": str(delta)}
    if not passed and N < N_min:
        passed = None
        detail["reason"] = f"bound is asymptotic; N < N_min={N_min}"
    return CheckResult(passed=passed, margin=float(margin), detail=detail)


def _at_least(value: Fraction, thr: Threshold, precision: int, cap: int) -> bool:
    """value >= thr, with equality accepted (inclusive boundary)."""
    if thr.exact is not None:
        return value >= thr.exact
    prec = precision
    while prec <= cap:
        lo, hi = thr.enclosure(prec)
        if value >= hi:
            return True
        if value < lo:
            return False
        prec *= 2
    raise PrecisionExhausted("boundary comparison undecided at precision cap")
