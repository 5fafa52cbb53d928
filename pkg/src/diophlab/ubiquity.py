"""Interval-union measure and the block covering conditions.

Condition (U) asks that the rational balls contributed by each k-adic block
(k^(j-1), k^j] of denominators keep a uniform share kappa of [0,1].  The
selection argument for k is a displacement bound: the full covering at
N = k^j has measure 1, so once the balls owned by small denominators
q <= k^(j-1) take up at most 1 - kappa, the block must supply the rest.

Measures are exact interval sweeps while the ball count stays within a
budget, and seeded Monte Carlo membership sampling beyond it.  Membership
in a union of balls of common radius r around the fractions p/q is decided
without enumerating p: y lies in one iff ||q*y|| < q*r.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .certified import (
    PRECISION_CAP,
    PRECISION_DEFAULT,
    RealVector,
    algebraic_power,
)
from .counting import qualifying_q_fixed
from .errors import BudgetExceeded, PreconditionViolated, PrecisionExhausted
from .psi import ApproxFunction, _divergence_verdict, check_u_regular

Rat = Union[int, Fraction]

KAPPA_FLOOR_DEFAULT = Fraction(1, 20)
BALL_BUDGET_DEFAULT = 2 * 10 ** 6
MC_SAMPLES_DEFAULT = 4000
SCAN_BUDGET_DEFAULT = 10 ** 9
SEED_DEFAULT = 20260826


@dataclass(frozen=True)
class IntervalUnion:
    """Disjoint sorted closed subintervals of [0,1] with exact measure."""

    intervals: Tuple[Tuple[Fraction, Fraction], ...]

    @staticmethod
    def from_intervals(raw: Sequence[Tuple[Rat, Rat]]) -> "IntervalUnion":
        clipped = []
        for lo, hi in raw:
            lo, hi = max(Fraction(lo), Fraction(0)), min(Fraction(hi), Fraction(1))
            if lo <= hi:
                clipped.append((lo, hi))
        clipped.sort()
        merged: List[Tuple[Fraction, Fraction]] = []
        for lo, hi in clipped:
            if merged and lo <= merged[-1][1]:
                if hi > merged[-1][1]:
                    merged[-1] = (merged[-1][0], hi)
            else:
                merged.append((lo, hi))
        return IntervalUnion(tuple(merged))

    @property
    def measure(self) -> Fraction:
        return sum((hi - lo for lo, hi in self.intervals), Fraction(0))

    def contains(self, other: "IntervalUnion") -> bool:
        i = 0
        for lo, hi in other.intervals:
            while i < len(self.intervals) and self.intervals[i][1] < lo:
                i += 1
            if i == len(self.intervals) or not (
                self.intervals[i][0] <= lo and hi <= self.intervals[i][1]
            ):
                return False
        return True


def union_of_balls(
    centers: Sequence[Tuple[int, int]],
    radius_rule: Callable[[int], Rat],
) -> IntervalUnion:
    """Union over (p, q) of B(p/q, radius_rule(q)), clipped to [0,1]."""
    raw = []
    for p, q in centers:
        r = Fraction(radius_rule(q))
        if r <= 0:
            raise PreconditionViolated("radii must be positive")
        c = Fraction(p, q)
        raw.append((c - r, c + r))
    return IntervalUnion.from_intervals(raw)


def _radius_lower(
    num: Rat, psi: ApproxFunction, q_eval: int, power: int, precision: int
) -> Fraction:
    """Rational lower bound of num / psi(q_eval)**power (num rational)."""
    exact = psi.pow_exact(q_eval, power)
    if exact is not None:
        return Fraction(num) / exact
    _, hi = psi.pow_enclosure(q_eval, Fraction(power), precision)
    return Fraction(num) / hi


_DYADIC_BITS = 60


def _dyadic_floor(f: Fraction, bits: int = _DYADIC_BITS) -> Fraction:
    """Round down to a dyadic with a short numerator; keeps sweep integers
    small.  Rounding shrinks radii, so measures stay valid lower bounds."""
    if f <= 0:
        return Fraction(0)
    # keep ~bits significant bits even for tiny radii
    shift = bits + max(0, f.denominator.bit_length() - f.numerator.bit_length())
    return Fraction((f.numerator << shift) // f.denominator, 1 << shift)


def _sweep_measure(
    items: List[Tuple[int, int, int]], K: int
) -> Tuple[Fraction, List[Tuple[Fraction, Fraction]]]:
    """Measure of the union of intervals [n_lo/(q*K), n_hi/(q*K)] clipped to
    [0,1], given as (n_lo, n_hi, q) triples.

    Sorting uses float keys (fast); all merge decisions are exact integer
    cross-multiplications, so a key collision cannot corrupt the result
    beyond the ordering of identical values.
    """
    balls = []
    for n_lo, n_hi, q in items:
        cap_n = q * K
        n_lo, n_hi = max(n_lo, 0), min(n_hi, cap_n)
        if n_lo < n_hi:
            balls.append((n_lo / q, n_lo, n_hi, q))
    if not balls:
        return Fraction(0), []
    balls.sort(key=lambda t: t[0])
    comps: List[Tuple[Fraction, Fraction]] = []

    def emit(lo_n: int, lo_q: int, hi_n: int, hi_q: int) -> None:
        comps.append((Fraction(lo_n, lo_q * K), Fraction(hi_n, hi_q * K)))

    _, lo_n, hi_n, q0 = balls[0]
    lo_q = hi_q = q0
    for _, n_lo, n_hi, q in balls[1:]:
        if n_lo * hi_q <= hi_n * q:  # overlaps or touches the open component
            if n_hi * hi_q > hi_n * q:
                hi_n, hi_q = n_hi, q
        else:
            emit(lo_n, lo_q, hi_n, hi_q)
            lo_n, lo_q, hi_n, hi_q = n_lo, q, n_hi, q
    emit(lo_n, lo_q, hi_n, hi_q)
    measure = sum((hi - lo for lo, hi in comps), Fraction(0))
    return measure, comps


def _check_nreq(
    x: RealVector, psi: ApproxFunction, N: int, d: int, precision: int, cap: int
) -> None:
    """Certify N^(-1/(d-1)) < psi(N) < 1."""
    if d < 2:
        raise PreconditionViolated("need d >= 2")
    floor_thr = algebraic_power(N, Fraction(-1, d - 1))
    prec = precision
    while prec <= cap:
        f_lo, f_hi = floor_thr.enclosure(prec)
        p_lo, p_hi = psi.enclosure(N, prec)
        if p_hi < 1 and f_hi < p_lo:
            return
        if p_lo >= 1 or p_hi <= f_lo:
            raise PreconditionViolated(
                f"(Nreq) fails at N={N}: need N^(-1/(d-1)) < psi(N) < 1"
            )
        prec *= 2
    raise PrecisionExhausted("(Nreq) comparison undecided at precision cap")


def mink_cover(
    x: RealVector,
    psi: ApproxFunction,
    N: int,
    precision: int = PRECISION_DEFAULT,
    cap: int = PRECISION_CAP,
    ball_budget: int = BALL_BUDGET_DEFAULT,
) -> IntervalUnion:
    """The covering union of B(p/q, 2/(q*N*psi(N)^(d-1))) over q <= N with
    ||q*x|| < psi(N) and p = 0..q; full coverage of [0,1] is the contract."""
    d = x.dim + 1
    _check_nreq(x, psi, N, d, precision, cap)
    qs = qualifying_q_fixed(x, psi.threshold_at(N), 0, N, precision, cap)
    scale = _radius_lower(Fraction(2, N), psi, N, d - 1, precision)
    r = _dyadic_floor(scale)
    n_balls = (int(np.sum(qs.astype(object))) + len(qs)) if len(qs) else 0
    if n_balls > ball_budget:
        raise BudgetExceeded(f"{n_balls} covering balls exceed budget {ball_budget}")
    rn, K = r.numerator, r.denominator
    items: List[Tuple[int, int, int]] = []
    for q in qs:
        q = int(q)
        items.extend((p * K - rn, p * K + rn, q) for p in range(q + 1))
    _, comps = _sweep_measure(items, K)
    return IntervalUnion(tuple(comps))


def _mc_samples(seed: int, k: int, j: int, n: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence([seed, k, j]))
    return rng.random(n)


def _union_measure_hybrid(
    qs: np.ndarray,
    radius_num: Fraction,
    radius_over_q: bool,
    ball_budget: int,
    samples: Optional[np.ndarray],
) -> Tuple[float, str, Optional[Fraction]]:
    """Measure of the union over q in qs, p = 0..q of balls B(p/q, r_q),
    where r_q = radius_num/q (radius_over_q) or r_q = radius_num.

    Exact sweep within the ball budget, else membership sampling via the
    ball key ||q*y|| < q*r_q.  Returns (measure, method, exact measure or
    None); exact measures are lower bounds within 2^-60 per ball of truth
    (radii are rounded down to a common dyadic grid).
    """
    if len(qs) == 0:
        return 0.0, "exact", Fraction(0)
    n_balls = int(np.sum(qs.astype(object))) + len(qs)
    if n_balls <= ball_budget:
        r = _dyadic_floor(radius_num)
        if r <= 0:
            return 0.0, "exact", Fraction(0)
        rn, K = r.numerator, r.denominator
        items: List[Tuple[int, int, int]] = []
        for q in qs:
            q = int(q)
            if radius_over_q:
                # endpoints (p*K +- rn) / (q*K)
                items.extend((p * K - rn, p * K + rn, q) for p in range(q + 1))
            else:
                # endpoints (p*K +- q*rn) / (q*K)
                qr = q * rn
                items.extend((p * K - qr, p * K + qr, q) for p in range(q + 1))
        m, _ = _sweep_measure(items, K)
        return float(m), "exact", m
    if samples is None:
        raise BudgetExceeded(
            f"{n_balls} balls exceed the exact budget and sampling is disabled"
        )
    member = np.zeros(len(samples), dtype=bool)
    rf = float(radius_num)
    CH = max(1, (4 * 10 ** 7) // max(1, len(samples)))
    for lo in range(0, len(qs), CH):
        chunk = qs[lo : lo + CH].astype(np.float64)
        thr = np.full(len(chunk), rf) if radius_over_q else chunk * rf
        t = np.outer(chunk, samples)
        fr = np.mod(t, 1.0)
        dist = np.minimum(fr, 1.0 - fr)
        member |= np.any(dist < thr[:, None], axis=0)
    return float(np.mean(member)), "monte-carlo", None


@dataclass
class PerJRow:
    j: int
    block_count: int
    u_measure: float
    u_method: str
    r_ratio: Optional[float]
    d_partial_raw: float
    d_partial_scaled: float


@dataclass
class UbiquityReport:
    k: int
    c: Fraction
    kappa_floor: Fraction
    per_j: List[PerJRow]
    verdicts: dict
    kappa_witness: Optional[float]
    j0: Optional[int]
    seed: int
    notes: List[str] = field(default_factory=list)


def check_conditions(
    x: RealVector,
    psi: ApproxFunction,
    d: int,
    k: int,
    c: Rat,
    j_range: Sequence[int],
    kappa_floor: Rat = KAPPA_FLOOR_DEFAULT,
    precision: int = PRECISION_DEFAULT,
    cap: int = PRECISION_CAP,
    ball_budget: int = BALL_BUDGET_DEFAULT,
    mc_samples: int = MC_SAMPLES_DEFAULT,
    seed: int = SEED_DEFAULT,
    scan_budget: int = SCAN_BUDGET_DEFAULT,
) -> UbiquityReport:
    """Evaluate conditions (U), (R), (D) for the k-adic block system."""
    if k < 2:
        raise PreconditionViolated("need k >= 2")
    c = Fraction(c)
    kappa_floor = Fraction(kappa_floor)
    js = sorted(j_range)
    if not js:
        raise PreconditionViolated("empty j range")
    rows: List[PerJRow] = []
    d_raw = Fraction(0)
    d_incs: List[float] = []
    for j in js:
        lo_q, hi_q = k ** (j - 1), k ** j
        qs = qualifying_q_fixed(
            x, psi.threshold_at(hi_q), lo_q, hi_q, precision, cap, scan_budget
        )
        if len(qs):
            rho = _radius_lower(c, psi, hi_q, d - 1, precision) / k ** (2 * j)
            samples = _mc_samples(seed, k, j, mc_samples)
            measure, method, _ = _union_measure_hybrid(
                qs, rho, False, ball_budget, samples
            )
        else:
            measure, method = 0.0, "exact"  # empty union
        # (R): ratio Psi(k^(j+1)) / Psi(k^j) with Psi = psi(q)/q
        pj = psi.exact_value(hi_q)
        pj1 = psi.exact_value(hi_q * k)
        if pj is not None and pj1 is not None and pj > 0:
            ratio = float((pj1 / (hi_q * k)) / (pj / hi_q))
        else:
            plo, phi_ = psi.enclosure(hi_q, precision)
            plo1, phi1 = psi.enclosure(hi_q * k, precision)
            ratio = float((plo1 + phi1) / 2 / k / ((plo + phi_) / 2)) if phi_ > 0 else None
        # (D): increments k^j * psi(k^j)^d
        term = psi.pow_exact(hi_q, d)
        if term is None:
            tlo, thi = psi.pow_enclosure(hi_q, Fraction(d), precision)
            term = (tlo + thi) / 2
        inc = hi_q * term
        d_raw += inc
        d_incs.append(float(inc))
        rows.append(
            PerJRow(
                j=j,
                block_count=len(qs),
                u_measure=measure,
                u_method=method,
                r_ratio=ratio,
                d_partial_raw=float(d_raw),
                d_partial_scaled=float(d_raw / c),
            )
        )
    # verdicts
    floor_f = float(kappa_floor)
    j0: Optional[int] = None
    for row, j in zip(rows, js):
        if row.u_measure >= floor_f:
            if j0 is None:
                j0 = j
        else:
            j0 = None
    if j0 is not None:
        u_verdict = f"holds-from({j0})"
        kappa_witness = min(r.u_measure for r, j in zip(rows, js) if j >= j0)
    else:
        u_verdict = "fails"
        kappa_witness = None
    r_holds, r_kappa = check_u_regular(psi, k, js, precision=precision, cap=cap)
    r_verdict = "holds-from(%d)" % js[0] if r_holds else "fails"
    dv = _divergence_verdict(d_incs, 1e-6, 0.9, min(5, len(d_incs)))
    d_verdict = {"diverges": "holds-from(%d)" % js[0]}.get(
        dv, "fails" if dv == "converges" else "inconclusive"
    )
    return UbiquityReport(
        k=k,
        c=c,
        kappa_floor=kappa_floor,
        per_j=rows,
        verdicts={"U": u_verdict, "R": r_verdict, "D": d_verdict},
        kappa_witness=kappa_witness,
        j0=j0,
        seed=seed,
        notes=[f"(R) kappa witness {r_kappa}" if r_holds else "(R) ratio exceeded 1/k"],
    )


def small_q_mass(
    x: RealVector,
    psi: ApproxFunction,
    d: int,
    k: int,
    j: int,
    precision: int = PRECISION_DEFAULT,
    cap: int = PRECISION_CAP,
    ball_budget: int = BALL_BUDGET_DEFAULT,
    mc_samples: int = MC_SAMPLES_DEFAULT,
    seed: int = SEED_DEFAULT,
    scan_budget: int = SCAN_BUDGET_DEFAULT,
) -> Tuple[float, str]:
    """Measure of the covering balls owned by q <= k^(j-1) at level N = k^j.

    These balls have radius 2/(q*N*psi(N)^(d-1)), so the ball key threshold
    q*r = 2/(N*psi(N)^(d-1)) is one constant per level.
    """
    N = k ** j
    qs = qualifying_q_fixed(
        x, psi.threshold_at(N), 0, k ** (j - 1), precision, cap, scan_budget
    )
    if not len(qs):
        return 0.0, "exact"  # empty union
    scale = _radius_lower(Fraction(2, N), psi, N, d - 1, precision)
    # offset distinguishes the small-q stream from the block-(U) stream
    samples = _mc_samples(seed, k, j + 1000, mc_samples)
    measure, method, _ = _union_measure_hybrid(
        qs, scale, True, ball_budget, samples
    )
    return measure, method


def select_k(
    x: RealVector,
    psi: ApproxFunction,
    d: int,
    k_search: Sequence[int],
    j_range: Sequence[int],
    kappa_floor: Rat = KAPPA_FLOOR_DEFAULT,
    precision: int = PRECISION_DEFAULT,
    cap: int = PRECISION_CAP,
    ball_budget: int = BALL_BUDGET_DEFAULT,
    mc_samples: int = MC_SAMPLES_DEFAULT,
    seed: int = SEED_DEFAULT,
    scan_budget: int = SCAN_BUDGET_DEFAULT,
) -> Tuple[Optional[int], Optional[UbiquityReport], List[dict]]:
    """Smallest k certifying the block lower bound with c = 2k.

    For each candidate k (ascending) the small-q displacement masses are
    computed first: if the mass stays <= 1 - kappa_floor from some level j0
    through the end of the tested range, the displacement argument already
    forces every block union from j0 on to have measure >= kappa_floor, and
    the candidate is accepted after confirming the report.  The displacement
    bound is sufficient but not necessary, so when it is inconclusive the
    block unions are measured directly and the candidate is accepted if
    those measures clear the floor from some j0 onward.  Levels whose scans
    would exceed scan_budget are skipped and recorded as such.  Returns
    (k, report with c = 2k, per-k diagnostics); (None, None, diagnostics)
    if no candidate is accepted.
    """
    ks = sorted(set(k_search))
    if not ks:
        raise PreconditionViolated("empty k search range")
    js = sorted(j_range)
    kappa_floor = Fraction(kappa_floor)
    ceiling = 1 - float(kappa_floor)
    diagnostics: List[dict] = []
    for k in ks:
        tested = [j for j in js if k ** j <= scan_budget]
        skipped = [j for j in js if k ** j > scan_budget]
        masses = []
        j0: Optional[int] = None
        for j in tested:
            m, method = small_q_mass(
                x, psi, d, k, j, precision, cap, ball_budget, mc_samples, seed,
                scan_budget,
            )
            masses.append({"j": j, "mass": m, "method": method})
            if m <= ceiling:
                if j0 is None:
                    j0 = j
            else:
                j0 = None
        entry = {"k": k, "j0": j0, "masses": masses, "skipped": skipped,
                 "route": None}
        diagnostics.append(entry)
        if not tested:
            continue
        if j0 is not None:
            report = check_conditions(
                x, psi, d, k, 2 * k, [j for j in tested if j >= j0],
                kappa_floor, precision, cap, ball_budget, mc_samples, seed,
                scan_budget,
            )
            if report.verdicts.get("U", "").startswith("holds"):
                entry["route"] = "displacement"
                return k, report, diagnostics
        # Displacement bound inconclusive: measure the block unions directly.
        report = check_conditions(
            x, psi, d, k, 2 * k, tested,
            kappa_floor, precision, cap, ball_budget, mc_samples, seed,
            scan_budget,
        )
        if report.j0 is not None and report.verdicts.get(
                "U", "").startswith("holds"):
            entry["route"] = "direct"
            entry["j0"] = report.j0
            return k, report, diagnostics
    return None, None, diagnostics


def report_rows(rep: UbiquityReport) -> List[List[str]]:
    """CSV rows (k, c, j, block_count, union_measure, R_ratio, D_partial)."""
    return [
        [
            str(rep.k),
            str(rep.c),
            str(row.j),
            str(row.block_count),
            repr(row.u_measure),
            "" if row.r_ratio is None else repr(row.r_ratio),
            repr(row.d_partial_raw),
        ]
        for row in rep.per_j
    ]
