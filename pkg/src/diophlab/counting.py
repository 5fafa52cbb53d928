"""Counting functions over q-ranges with certified threshold comparisons.

The central object is the count |{M < q <= N : ||q*x + gamma|| < delta}|.
Counts are exact: rational coordinates against rational thresholds go
through integer arithmetic, irrational coordinates go through a float scan
with a rigorous guard band whose undecided stragglers are resolved by
certified refinement.  Range iteration proceeds in fixed blocks so counts
are independent of any internal partitioning.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .certified import (
    PRECISION_CAP,
    PRECISION_DEFAULT,
    RealExpr,
    RealVector,
    Threshold,
    dist_less_than,
    float_with_error,
)
from .errors import BudgetExceeded, PrecisionExhausted
from .psi import ApproxFunction

BLOCK = 1 << 16
WITNESS_CAP = 10_000
SCAN_BUDGET_DEFAULT = 10 ** 8

Rat = Union[int, Fraction]
DeltaLike = Union[Rat, Threshold, ApproxFunction]


def _as_threshold(delta: DeltaLike, N: int) -> Threshold:
    """Resolve a delta argument; approximating functions are evaluated at N."""
    if isinstance(delta, Threshold):
        return delta
    if isinstance(delta, ApproxFunction):
        return delta.threshold_at(N)
    return Threshold.from_fraction(delta)


@dataclass(frozen=True)
class CountQuery:
    x: RealVector
    delta: DeltaLike
    M: int
    N: int
    gamma: Optional[RealVector] = None

    def __post_init__(self) -> None:
        if not (0 <= self.M < self.N):
            raise ValueError("need 0 <= M < N")
        if self.gamma is not None and self.gamma.dim != self.x.dim:
            raise ValueError("gamma dimension mismatch")


@dataclass
class CountReport:
    count: int
    threshold_lo: Fraction
    threshold_hi: Fraction
    lemma_lower_bound: Fraction
    bound_satisfied: bool
    q_lo: int
    q_hi: int
    witnesses: Optional[List[int]] = None


@dataclass
class CheckResult:
    """Outcome of a verified inequality; passed may be None (inconclusive)."""

    passed: Optional[bool]
    margin: Optional[float] = None
    detail: dict = field(default_factory=dict)


def _coord_mask_rational(
    p: int, D: int, g_num: int, g_den: int, q_arr: np.ndarray,
    thr_lo: Fraction, thr_hi: Fraction,
) -> Tuple[np.ndarray, np.ndarray]:
    """Exact decision mask for one rational coordinate p/D shifted by
    g_num/g_den, against a threshold enclosure.  Returns (qualifies,
    undecided); undecided is nonempty only for irrational thresholds whose
    enclosure brackets an attained rational distance."""
    DG = D * g_den
    num = (q_arr * (p * g_den) + g_num * D) % DG
    dist_num = np.minimum(num, DG - num)
    # dist = dist_num / DG; compare against threshold enclosure exactly
    lo_n, lo_d = thr_lo.numerator, thr_lo.denominator
    hi_n, hi_d = thr_hi.numerator, thr_hi.denominator
    if thr_lo == thr_hi:
        yes = np.asarray(dist_num * hi_d < hi_n * DG, dtype=bool)
        return yes, np.zeros_like(yes, dtype=bool)
    yes = np.asarray(dist_num * lo_d < lo_n * DG, dtype=bool)
    no = np.asarray(dist_num * hi_d >= hi_n * DG, dtype=bool)
    return yes, ~(yes | no)


def _rational_fits_int64(coords: Sequence[RealExpr], gamma, N: int, thr: Threshold) -> bool:
    if thr.exact is None:
        return False
    if max(abs(thr.exact.numerator), thr.exact.denominator) > 1 << 40:
        return False
    for i, c in enumerate(coords):
        D = c.a.denominator
        gd = 1
        if gamma is not None:
            g = gamma.coords[i].exact_fraction()
            if g is None:
                return False
            gd = g.denominator
        if abs(c.a.numerator) * gd * N >= 1 << 62 or D * gd >= 1 << 31:
            return False
    return True


class _CoordScanner:
    """Per-coordinate qualifier over numpy q blocks."""

    def __init__(self, coord: RealExpr, gamma_i: Optional[RealExpr]):
        self.coord = coord
        self.gamma = gamma_i
        self.rational = coord.is_rational and (gamma_i is None or gamma_i.is_rational)
        if self.rational:
            self.p = coord.a
            self.g = gamma_i.a if gamma_i is not None else Fraction(0)
        else:
            base, err = float_with_error(coord)
            self.xf = base
            self.xerr = err
            gshift = 0.0
            if gamma_i is not None:
                gf, gerr = float_with_error(gamma_i)
                gshift, self.xerr = gf, err + gerr
            self.gf = gshift

    def masks(
        self, q_arr: np.ndarray, thr_lo: Fraction, thr_hi: Fraction
    ) -> Tuple[np.ndarray, np.ndarray]:
        if self.rational:
            if (
                q_arr.dtype != object
                and len(q_arr)
                and abs(self.p.numerator) * self.g.denominator * int(q_arr[-1]) >= 1 << 61
            ):
                q_arr = q_arr.astype(object)
            return _coord_mask_rational(
                self.p.numerator, self.p.denominator,
                self.g.numerator, self.g.denominator,
                q_arr, thr_lo, thr_hi,
            )
        t = q_arr * self.xf + self.gf
        fr = np.mod(t, 1.0)
        dist = np.minimum(fr, 1.0 - fr)
        guard = q_arr * (self.xerr + 2.0 ** -50) + 1e-14
        lo_f, hi_f = float(thr_lo), float(thr_hi)
        yes = dist + guard < lo_f
        no = dist - guard >= hi_f
        return yes, ~(yes | no)


def count_Q(
    query: CountQuery,
    precision: int = PRECISION_DEFAULT,
    cap: int = PRECISION_CAP,
    keep_witnesses: bool = False,
    witness_cap: int = WITNESS_CAP,
    scan_budget: int = SCAN_BUDGET_DEFAULT,
) -> CountReport:
    """Exact cardinality of {M < q <= N : ||q*x + gamma|| < delta}.

    Also reports the counting lemma's lower bound N*delta^ell - 1 (computed
    from the threshold's upper endpoint, so a True verdict is certified).
    """
    x, M, N = query.x, query.M, query.N
    if N - M > scan_budget:
        raise BudgetExceeded(f"q-range of size {N - M} exceeds scan budget {scan_budget}")
    thr = _as_threshold(query.delta, N)
    thr_lo, thr_hi = thr.enclosure(precision)
    scanners = [
        _CoordScanner(c, query.gamma.coords[i] if query.gamma is not None else None)
        for i, c in enumerate(x.coords)
    ]
    use_int64 = all(s.rational for s in scanners) and _rational_fits_int64(
        x.coords, query.gamma, N, thr
    )
    gamma_seq = (
        [g.exact_fraction() for g in query.gamma.coords] if query.gamma is not None else None
    )

    total = 0
    witnesses: Optional[List[int]] = [] if keep_witnesses else None
    for lo_q in range(M + 1, N + 1, BLOCK):
        hi_q = min(lo_q + BLOCK - 1, N)
        dtype = np.int64 if use_int64 else object
        q_arr = np.arange(lo_q, hi_q + 1, dtype=dtype)
        q_f = q_arr.astype(np.float64) if not all(s.rational for s in scanners) else None
        yes_all = np.ones(len(q_arr), dtype=bool)
        undecided_any = np.zeros(len(q_arr), dtype=bool)
        for s in scanners:
            arr = q_arr if s.rational else q_f
            yes, und = s.masks(arr, thr_lo, thr_hi)
            yes_all &= yes | und
            undecided_any |= und
        undecided_any &= yes_all
        decided_yes = yes_all & ~undecided_any
        total += int(np.count_nonzero(decided_yes))
        if witnesses is not None:
            for q in q_arr[decided_yes]:
                if len(witnesses) < witness_cap:
                    witnesses.append(int(q))
        for q in q_arr[undecided_any]:
            try:
                ok = dist_less_than(x, int(q), thr, precision, cap, gamma=gamma_seq)
            except PrecisionExhausted as exc:
                raise PrecisionExhausted(
                    f"comparison undecidable at q={int(q)}: {exc}"
                ) from exc
            if ok:
                total += 1
                if witnesses is not None and len(witnesses) < witness_cap:
                    witnesses.append(int(q))
    if witnesses is not None:
        witnesses.sort()
    ell = x.dim
    bound = N * thr_hi ** ell - 1
    return CountReport(
        count=total,
        threshold_lo=thr_lo,
        threshold_hi=thr_hi,
        lemma_lower_bound=bound,
        bound_satisfied=total >= bound,
        q_lo=M,
        q_hi=N,
        witnesses=witnesses,
    )


def verify_count_lower_bound(
    x: RealVector, delta: Rat, N: int, precision: int = PRECISION_DEFAULT
) -> CheckResult:
    """Check the theorem-backed bound count >= N*delta^ell - 1 exactly."""
    delta = Fraction(delta)
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0,1)")
    rep = count_Q(CountQuery(x, delta, 0, N), precision)
    margin = rep.count - (N * delta ** x.dim - 1)
    return CheckResult(
        passed=margin >= 0,
        margin=float(margin),
        detail={"count": rep.count, "bound": N * delta ** x.dim - 1},
    )


def block_counts(
    x: RealVector,
    psi: ApproxFunction,
    k: int,
    j_max: int,
    precision: int = PRECISION_DEFAULT,
    scan_budget: int = SCAN_BUDGET_DEFAULT,
) -> List[CountReport]:
    """Counts over blocks (k^(j-1), k^j] with threshold psi(k^j), j=1..j_max."""
    if k < 2 or j_max < 1:
        raise ValueError("need k >= 2 and j_max >= 1")
    out = []
    for j in range(1, j_max + 1):
        lo, hi = k ** (j - 1), k ** j
        out.append(
            count_Q(
                CountQuery(x, psi.threshold_at(hi), lo, hi),
                precision,
                scan_budget=scan_budget,
            )
        )
    return out


def qualifying_q_fixed(
    x: RealVector,
    threshold: DeltaLike,
    M: int,
    N: int,
    precision: int = PRECISION_DEFAULT,
    cap: int = PRECISION_CAP,
    scan_budget: int = SCAN_BUDGET_DEFAULT,
) -> np.ndarray:
    """All q in (M, N] with ||q*x|| < threshold, as an int64 array."""
    if N - M > scan_budget:
        raise BudgetExceeded(f"scan of size {N - M} exceeds budget {scan_budget}")
    thr = _as_threshold(threshold, N)
    thr_lo, thr_hi = thr.enclosure(precision)
    scanners = [_CoordScanner(c, None) for c in x.coords]
    rational_dtype = (
        np.int64
        if any(s.rational for s in scanners)
        and _rational_fits_int64(x.coords, None, N, thr)
        else object
    )
    chunks: List[np.ndarray] = []
    for lo_q in range(M + 1, N + 1, BLOCK):
        hi_q = min(lo_q + BLOCK - 1, N)
        q_arr = np.arange(lo_q, hi_q + 1, dtype=np.int64)
        q_f = q_arr.astype(np.float64)
        q_r = q_arr if rational_dtype is np.int64 else q_arr.astype(object)
        yes_all = np.ones(len(q_arr), dtype=bool)
        und_any = np.zeros(len(q_arr), dtype=bool)
        for s in scanners:
            yes, und = s.masks(q_r if s.rational else q_f, thr_lo, thr_hi)
            yes_all &= yes | und
            und_any |= und
        und_any &= yes_all
        accepted = list(q_arr[yes_all & ~und_any])
        for q in q_arr[und_any]:
            if dist_less_than(x, int(q), thr, precision, cap):
                accepted.append(q)
        accepted.sort()
        chunks.append(np.asarray(accepted, dtype=np.int64))
    if not chunks:
        return np.zeros(0, dtype=np.int64)
    return np.concatenate(chunks)


def qualifying_q(
    x: RealVector,
    psi: ApproxFunction,
    Q_lo: int,
    Q_max: int,
    precision: int = PRECISION_DEFAULT,
    cap: int = PRECISION_CAP,
    scan_budget: int = SCAN_BUDGET_DEFAULT,
) -> np.ndarray:
    """All q in (Q_lo, Q_max] with ||q*x|| < psi(q), as an int64 array.

    Unlike count_Q the threshold here varies with q, so this is the per-q
    qualifier used by the series and measure experiments.
    """
    if Q_max - Q_lo > scan_budget:
        raise BudgetExceeded(f"scan of size {Q_max - Q_lo} exceeds budget {scan_budget}")
    scanners = [_CoordScanner(c, None) for c in x.coords]
    start = max(Q_lo + 1, psi.min_domain())
    chunks: List[np.ndarray] = []
    for lo_q in range(start, Q_max + 1, BLOCK):
        hi_q = min(lo_q + BLOCK - 1, Q_max)
        q_arr = np.arange(lo_q, hi_q + 1, dtype=np.int64)
        thr_lo_arr, thr_hi_arr = _psi_float_bounds(psi, q_arr)
        yes_all = np.ones(len(q_arr), dtype=bool)
        und_any = np.zeros(len(q_arr), dtype=bool)
        q_f = q_arr.astype(np.float64)
        for s in scanners:
            if s.rational:
                p, D = s.p.numerator, s.p.denominator
                qq = q_arr if abs(p) * hi_q < 1 << 62 else q_arr.astype(object)
                num = (qq * p) % D
                dist = np.asarray(np.minimum(num, D - num), dtype=np.float64) / np.float64(D)
                guard = np.abs(dist) * 2.0 ** -50 + 1e-300
            else:
                t = q_f * s.xf
                fr = np.mod(t, 1.0)
                dist = np.minimum(fr, 1.0 - fr)
                guard = q_f * (s.xerr + 2.0 ** -50) + 1e-14
            yes = dist + guard < thr_lo_arr
            no = dist - guard >= thr_hi_arr
            yes_all &= yes | ~(yes | no)
            und_any |= ~(yes | no)
        und_any &= yes_all
        decided = yes_all & ~und_any
        accepted = list(q_arr[decided])
        for q in q_arr[und_any]:
            if dist_less_than(x, int(q), psi.threshold_at(int(q)), precision, cap):
                accepted.append(q)
        accepted.sort()
        chunks.append(np.asarray(accepted, dtype=np.int64))
    if not chunks:
        return np.zeros(0, dtype=np.int64)
    return np.concatenate(chunks)


def _psi_float_bounds(psi: ApproxFunction, q_arr: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorized float bracket of psi over a q block (guarded, not exact)."""
    from . import psi as psi_mod

    if isinstance(psi, psi_mod.ConstantPsi):
        v = float(psi.c)
        ones = np.full(len(q_arr), v)
        return ones, ones
    if isinstance(psi, psi_mod.PowerPsi):
        mids = np.power(q_arr.astype(np.float64), -float(psi.a))
    elif isinstance(psi, psi_mod.PowerLogPsi):
        qf = q_arr.astype(np.float64)
        mids = np.power(qf, -float(psi.a)) * np.power(np.log(qf), -float(psi.b))
    elif isinstance(psi, psi_mod.PhiPsi):
        qf = np.maximum(q_arr.astype(np.float64), 2.0)
        mids = np.power(qf * np.log(qf) ** 2, -1.0 / psi.d)
    elif isinstance(psi, psi_mod.MaxPsi):
        flo, fhi = _psi_float_bounds(psi.f, q_arr)
        glo, ghi = _psi_float_bounds(psi.g, q_arr)
        return np.maximum(flo, glo), np.maximum(fhi, ghi)
    elif isinstance(psi, psi_mod.TablePsi):
        qs = np.asarray([p[0] for p in psi.points], dtype=np.int64)
        vs = np.asarray([float(p[1]) for p in psi.points])
        idx = np.clip(np.searchsorted(qs, q_arr, side="right") - 1, 0, len(vs) - 1)
        mids = vs[idx]
    else:
        mids = np.asarray([float(sum(psi.enclosure(int(q), 53)) / 2) for q in q_arr])
    pad = np.abs(mids) * 1e-12 + 1e-300
    return mids - pad, mids + pad


def partial_series(
    x: RealVector,
    psi: ApproxFunction,
    k_exp: int,
    Q_max: int,
    precision: int = PRECISION_DEFAULT,
    scan_budget: int = SCAN_BUDGET_DEFAULT,
) -> List[Tuple[int, Union[Fraction, float]]]:
    """Partial sums of sum psi(q)**k_exp over qualifying q, at dyadic
    checkpoints Q = 1, 2, 4, ... and at Q_max.  Sums stay exact rationals
    while every contributing term is exactly representable."""
    if Q_max < 1 or k_exp < 1:
        raise ValueError("need Q_max >= 1 and k_exp >= 1")
    qs = qualifying_q(x, psi, 0, Q_max, precision, scan_budget=scan_budget)
    checkpoints = []
    cp = 1
    while cp < Q_max:
        checkpoints.append(cp)
        cp *= 2
    checkpoints.append(Q_max)
    total: Union[Fraction, float] = Fraction(0)
    out: List[Tuple[int, Union[Fraction, float]]] = []
    idx = 0
    for cp in checkpoints:
        while idx < len(qs) and qs[idx] <= cp:
            q = int(qs[idx])
            term = psi.pow_exact(q, k_exp)
            if term is None:
                lo, hi = psi.pow_enclosure(q, Fraction(k_exp), 64)
                total = float(total) + float((lo + hi) / 2)
            elif isinstance(total, Fraction):
                total = total + term
            else:
                total = total + float(term)
            idx += 1
        out.append((cp, total))
    return out


def verify_cor_nalpha(
    x: RealVector,
    psi: ApproxFunction,
    k: int,
    ell_shift: int,
    j_range: Sequence[int],
    C: Union[float, Fraction],
    precision: int = PRECISION_DEFAULT,
    scan_budget: int = SCAN_BUDGET_DEFAULT,
) -> Tuple[List[CheckResult], Optional[int]]:
    """Audit count{0 < q <= k^(j+shift) : ||qx|| < psi(k^j)} against
    C * k^(j+shift) * psi(k^j)**(d-1), per j; returns per-j results and the
    least tested j from which the bound holds through the end of the range."""
    d = x.dim + 1
    results: List[CheckResult] = []
    js = list(j_range)
    for j in js:
        N = k ** (j + ell_shift)
        if N < 1:
            results.append(CheckResult(passed=None, detail={"j": j, "reason": "empty range"}))
            continue
        thr = psi.threshold_at(k ** j)
        rep = count_Q(CountQuery(x, thr, 0, N), precision, scan_budget=scan_budget)
        plo, phi_ = psi.pow_enclosure(k ** j, d - 1, precision)
        rhs_lo = Fraction(C) * N * plo
        rhs_hi = Fraction(C) * N * phi_
        if rep.count <= rhs_lo:
            passed: Optional[bool] = True
        elif rep.count > rhs_hi:
            passed = False
        else:
            passed = None
        results.append(
            CheckResult(
                passed=passed,
                margin=float(rhs_lo - rep.count),
                detail={"j": j, "count": rep.count, "rhs": float(rhs_lo)},
            )
        )
    holds_from: Optional[int] = None
    for res, j in zip(results, js):
        if res.passed:
            if holds_from is None:
                holds_from = j
        else:
            holds_from = None
    return results, holds_from


def count_report_rows(reports: Sequence[CountReport]) -> List[List[str]]:
    """CSV rows (j, q_lo, q_hi, threshold, count, bound, pass)."""
    rows = []
    for j, rep in enumerate(reports, start=1):
        thr = float((rep.threshold_lo + rep.threshold_hi) / 2)
        rows.append(
            [
                str(j),
                str(rep.q_lo),
                str(rep.q_hi),
                repr(thr),
                str(rep.count),
                repr(float(rep.lemma_lower_bound)),
                "true" if rep.bound_satisfied else "false",
            ]
        )
    return rows
