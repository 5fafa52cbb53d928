"""Finite-height estimators for Diophantine exponents.

All estimators share one scheme: enumerate heights in dyadic blocks
2^(b-1) < h <= 2^b, record the smallest attained distance per block, turn
it into a block exponent normalized by the block ceiling u_b = min(2^b, H),
and aggregate over the top half of the blocks by minimum.  A single lucky
small-height hit therefore cannot dominate, and the aggregate only reports
behaviour that persists across the largest height scales inspected — a
finite proxy for the "infinitely many" quantifier in the definitions.

Exact resonance (an exact integer relation at height <= H) short-circuits
to +infinity.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .certified import (
    PRECISION_CAP,
    PRECISION_DEFAULT,
    RealExpr,
    RealVector,
    float_with_error,
)
from .counting import CheckResult, qualifying_q
from .errors import PreconditionViolated, PrecisionExhausted
from .psi import PowerPsi

Rat = Union[int, Fraction]
INF = math.inf

CELL_BUDGET_DEFAULT = 3 * 10 ** 7
BOUNDARY_MARGIN = 0.1


@dataclass
class BlockRecord:
    b: int
    h_lo: int  # exclusive
    h_hi: int  # inclusive
    min_dist: float
    witness: Tuple[int, ...]
    exponent: float


@dataclass
class ExponentEstimate:
    kind: str  # tau_D | omega_D | omega_S
    value: float  # lower bound for the true sup; may be math.inf
    height: int  # effective height actually scanned
    requested_height: int
    blocks: List[BlockRecord]
    best_witnesses: List[Tuple[Tuple[int, ...], float]]
    is_exact_resonance: bool
    boundary_regime: bool = False
    notes: List[str] = field(default_factory=list)


def _log_fraction(f: Fraction) -> float:
    """log of a positive rational, safe for huge numerators/denominators."""
    if f <= 0:
        raise ValueError("log of nonpositive value")
    n, d = f.numerator, f.denominator
    sn, sd = max(0, n.bit_length() - 60), max(0, d.bit_length() - 60)
    return math.log(n >> sn) + sn * math.log(2) - math.log(d >> sd) - sd * math.log(2)


def _block_of(h: np.ndarray) -> np.ndarray:
    """Dyadic block index: 2^(b-1) < h <= 2^b, with h = 1 -> b = 0."""
    hm = np.maximum(h - 1, 1).astype(np.float64)
    b = np.floor(np.log2(hm)).astype(np.int64) + 1
    b[h == 1] = 0
    return b


def _squarefree(c: int) -> Tuple[int, int]:
    """c = f^2 * s with s squarefree (trial division); returns (s, f)."""
    s, f, p = c, 1, 2
    while p * p <= s and p <= 10 ** 4:
        while s % (p * p) == 0:
            s //= p * p
            f *= p
        p += 1
    return s, f


def _inner_terms(
    x: RealVector, n_vec: Sequence[int]
) -> Tuple[Fraction, List[Tuple[int, Fraction]]]:
    """<n, x> as a rational part plus coefficients of sqrt(c), c squarefree."""
    a = Fraction(0)
    terms: dict = {}
    for ni, coord in zip(n_vec, x.coords):
        if ni == 0:
            continue
        a += ni * coord.a
        if coord.b != 0:
            s, f = _squarefree(coord.c)
            terms[s] = terms.get(s, Fraction(0)) + ni * coord.b * f
    return a, [(c, b) for c, b in sorted(terms.items()) if b != 0]


def _inner_dist(
    x: RealVector, n_vec: Sequence[int], precision: int, cap: int
) -> Fraction:
    """||<n, x>|| exactly (rational case) or with relative width < 2^-40.

    Distinct squarefree radicands are linearly independent over Q, so the
    value is rational iff every radical coefficient cancels.
    """
    from .certified import _dist_image, sqrt_enclosure

    a, terms = _inner_terms(x, n_vec)
    if not terms:
        return abs(a - round(a))
    prec = precision
    while prec <= cap:
        lo, hi = a, a
        for c, b in terms:
            slo, shi = sqrt_enclosure(c, prec + b.numerator.bit_length() + 2)
            if b > 0:
                lo, hi = lo + b * slo, hi + b * shi
            else:
                lo, hi = lo + b * shi, hi + b * slo
        dlo, dhi = _dist_image(lo, hi)
        if dlo > 0 and (dhi - dlo) * (1 << 40) <= dlo:
            return (dlo + dhi) / 2
        prec *= 2
    raise PrecisionExhausted("inner-product distance enclosure did not converge")


def _exact_dist(expr: RealExpr, precision: int, cap: int) -> Fraction:
    """||expr|| as an exact value or a relatively tight rational proxy.

    Rational expressions resolve exactly (including exact zero); irrational
    ones refine until the distance enclosure has relative width < 2^-40.
    """
    from .certified import _dist_image

    f = expr.exact_fraction()
    if f is not None:
        return abs(f - round(f))
    prec = precision
    while prec <= cap:
        lo, hi = expr.enclosure(prec)
        dlo, dhi = _dist_image(lo, hi)
        if dlo > 0 and (dhi - dlo) * (1 << 40) <= dlo:
            return (dlo + dhi) / 2
        prec *= 2
    raise PrecisionExhausted("distance enclosure did not converge")


def _degraded_height(H: int, ell: int, budget: int) -> int:
    if ell == 1:
        return min(H, budget)
    h = H
    while h > 2 and h * (2 * h + 1) ** (ell - 1) > budget:
        h = int(h * 0.9)
    return max(h, 2)


def _scan_dual(
    x: RealVector, H: int, precision: int, cap: int
) -> Tuple[dict, Optional[Tuple[int, ...]]]:
    """Per-block minimum of ||<n, x>|| over canonical nonzero n, |n|_inf <= H.

    Returns ({b: (min_dist_float, witness)}, resonance_witness_or_None).
    Block minima are refined exactly afterwards by the caller.
    """
    ell = x.dim
    rational = x.is_rational
    big = False
    if rational:
        D = math.lcm(*[c.a.denominator for c in x.coords])
        cs = [int(c.a * D) for c in x.coords]
        big = D >= 1 << 31 or any(abs(c) * H >= 1 << 62 for c in cs)
    else:
        mids, errs = zip(*[float_with_error(c) for c in x.coords])

    nblocks = (H - 1).bit_length() + 1
    best_val = np.full(nblocks, np.inf)
    best_wit: dict = {}
    resonance: Optional[Tuple[int, ...]] = None
    lead_vals = np.arange(1, H + 1, dtype=np.int64)
    lead_blocks = _block_of(lead_vals)

    def absorb(wit_of, blocks: np.ndarray, dist: np.ndarray) -> None:
        cur = np.full(nblocks, np.inf)
        np.minimum.at(cur, blocks, dist)
        for b in np.flatnonzero(cur < best_val):
            i = int(np.argmin(np.where(blocks == b, dist, np.inf)))
            best_val[b] = dist[i]
            best_wit[int(b)] = wit_of(i)

    # enumerate by position of the first nonzero coordinate
    for lead in range(ell):
        tail_dims = ell - lead - 1
        tail_iter = (
            itertools.product(range(-H, H + 1), repeat=tail_dims)
            if tail_dims
            else [()]
        )
        for tail in tail_iter:
            def wit_of(i: int, _lead=lead, _tail=tail) -> Tuple[int, ...]:
                return (0,) * _lead + (int(lead_vals[i]),) + _tail
            tail_h = max((abs(t) for t in tail), default=0)
            blocks = (
                lead_blocks
                if tail_h == 0
                else _block_of(np.maximum(lead_vals, tail_h))
            )
            if rational:
                lv = lead_vals.astype(object) if big else lead_vals
                r = (lv * cs[lead]) % D
                for k, t in enumerate(tail):
                    r = (r + t * cs[lead + 1 + k]) % D
                if resonance is None:
                    zero = np.flatnonzero(r == 0)
                    if len(zero):
                        resonance = wit_of(int(zero[0]))
                dist = np.minimum(r, D - r).astype(np.float64) / np.float64(D)
            else:
                t = lead_vals.astype(np.float64) * mids[lead]
                err = lead_vals.astype(np.float64) * errs[lead]
                for k, tv in enumerate(tail):
                    t = t + tv * mids[lead + 1 + k]
                    err = err + abs(tv) * errs[lead + 1 + k]
                fr = np.mod(t, 1.0)
                dist = np.minimum(fr, 1.0 - fr)
                guard = err + np.abs(t) * 2.0 ** -50 + 1e-15
                if resonance is None and bool(np.any(dist <= guard)):
                    for i in np.flatnonzero(dist <= guard):
                        wit = wit_of(int(i))
                        if _inner_dist(x, wit, precision, cap) == 0:
                            resonance = wit
                            break
            absorb(wit_of, blocks, dist)
    return {b: (float(best_val[b]), w) for b, w in best_wit.items()}, resonance


def _aggregate(
    blocks: List[BlockRecord], resonance: bool, window: float
) -> Tuple[float, List[Tuple[Tuple[int, ...], float]]]:
    if resonance:
        return INF, []
    if not blocks:
        return 0.0, []
    cut = int(len(blocks) * (1 - window))
    top = blocks[cut:] if cut < len(blocks) else blocks[-1:]
    value = min(rec.exponent for rec in top)
    wits = sorted(
        ((rec.witness, rec.exponent) for rec in top), key=lambda w: -w[1]
    )
    return value, wits


def _finalize(
    kind: str,
    x: RealVector,
    raw: dict,
    resonance: Optional[Tuple[int, ...]],
    H: int,
    requested: int,
    precision: int,
    cap: int,
    window: float,
    expo_fn,
    d_for_boundary: Optional[int] = None,
) -> ExponentEstimate:
    blocks: List[BlockRecord] = []
    for b in sorted(raw):
        dist_f, wit = raw[b]
        u_b = min(1 << b, H)
        dist = _inner_dist(x, wit, precision, cap)
        if dist == 0:
            resonance = resonance or wit
            continue
        if u_b < 2:
            continue
        e = expo_fn(-_log_fraction(dist) / math.log(u_b))
        h_lo = 0 if b == 0 else 1 << (b - 1)
        blocks.append(BlockRecord(b, h_lo, min(1 << b, H), float(dist), wit, e))
    value, wits = _aggregate(blocks, resonance is not None, window)
    if resonance is not None:
        wits = [(resonance, INF)]
    est = ExponentEstimate(
        kind=kind,
        value=value,
        height=H,
        requested_height=requested,
        blocks=blocks,
        best_witnesses=wits,
        is_exact_resonance=resonance is not None,
    )
    if d_for_boundary is not None and abs(value - d_for_boundary) < BOUNDARY_MARGIN:
        est.boundary_regime = True
        est.notes.append(
            f"estimate within {BOUNDARY_MARGIN} of the untreated boundary value "
            f"{d_for_boundary}; no dichotomy claim applies"
        )
    return est


def estimate_tau_D(
    x: RealVector,
    H: int,
    precision: int = PRECISION_DEFAULT,
    cap: int = PRECISION_CAP,
    cell_budget: int = CELL_BUDGET_DEFAULT,
    window: float = 0.5,
) -> ExponentEstimate:
    """Lower estimate of the dual type: sup of tau with ||<n,x>|| < |n|^-tau
    for infinitely many integer vectors n."""
    if H < 2:
        raise PreconditionViolated("need H >= 2")
    ell = x.dim
    res_idx = next((i for i, c in enumerate(x.coords) if c.is_rational), None)
    if res_idx is not None:
        # a rational coordinate forces resonance: n = den(x_i) * e_i kills
        # the form exactly, whatever the scan height
        wit = tuple(
            x.coords[res_idx].a.denominator if i == res_idx else 0 for i in range(ell)
        )
        return ExponentEstimate(
            kind="tau_D",
            value=INF,
            height=H,
            requested_height=H,
            blocks=[],
            best_witnesses=[(wit, INF)],
            is_exact_resonance=True,
        )
    H_eff = _degraded_height(H, ell, cell_budget)
    raw, resonance = _scan_dual(x, H_eff, precision, cap)
    est = _finalize(
        "tau_D", x, raw, resonance, H_eff, H, precision, cap, window,
        expo_fn=lambda e: e, d_for_boundary=ell + 1,
    )
    if H_eff < H:
        est.notes.append(f"height degraded from {H} to {H_eff} to meet cell budget")
    if not est.is_exact_resonance and est.value < ell:
        # tau_D >= ell unconditionally (Dirichlet), so the floor is still a
        # valid lower bound for the sup
        est.notes.append(f"aggregate below the Dirichlet floor {ell}; clamped")
        est.value = float(ell)
    return est


def estimate_omega_D(
    x_full: RealVector,
    H: int,
    precision: int = PRECISION_DEFAULT,
    cap: int = PRECISION_CAP,
    cell_budget: int = CELL_BUDGET_DEFAULT,
    window: float = 0.5,
) -> ExponentEstimate:
    """omega_D = tau_D - d on the same witness set (||<n,x>|| <= |n|^-(d+w))."""
    est = estimate_tau_D(x_full, H, precision, cap, cell_budget, window)
    d = x_full.dim
    shift = lambda v: v if v == INF else v - d
    return ExponentEstimate(
        kind="omega_D",
        value=shift(est.value),
        height=est.height,
        requested_height=est.requested_height,
        blocks=[
            BlockRecord(r.b, r.h_lo, r.h_hi, r.min_dist, r.witness, r.exponent - d)
            for r in est.blocks
        ],
        best_witnesses=[(w, shift(e)) for w, e in est.best_witnesses],
        is_exact_resonance=est.is_exact_resonance,
        boundary_regime=est.boundary_regime,
        notes=list(est.notes),
    )


def estimate_omega_S(
    x_full: RealVector,
    Q_max: int,
    precision: int = PRECISION_DEFAULT,
    cap: int = PRECISION_CAP,
    window: float = 0.5,
) -> ExponentEstimate:
    """Simultaneous exponent: block scan of d*(-log ||q*x|| / log u_b) - 1
    over q <= Q_max, same aggregation as the dual estimator."""
    if Q_max < 2:
        raise PreconditionViolated("need Q_max >= 2")
    d = x_full.dim
    if x_full.is_rational:
        # q = lcm of the denominators lands exactly on the integer grid
        L = math.lcm(*[c.a.denominator for c in x_full.coords])
        return ExponentEstimate(
            kind="omega_S",
            value=INF,
            height=Q_max,
            requested_height=Q_max,
            blocks=[],
            best_witnesses=[((L,), INF)],
            is_exact_resonance=True,
        )
    raw: dict = {}
    resonance: Optional[Tuple[int, ...]] = None
    scanners = [float_with_error(c) for c in x_full.coords]
    BLOCK = 1 << 16
    for lo_q in range(1, Q_max + 1, BLOCK):
        hi_q = min(lo_q + BLOCK - 1, Q_max)
        q = np.arange(lo_q, hi_q + 1, dtype=np.int64)
        qf = q.astype(np.float64)
        dist = np.zeros(len(q))
        for coord, (mid, err) in zip(x_full.coords, scanners):
            if coord.is_rational:
                p, D = coord.a.numerator, coord.a.denominator
                qq = q.astype(object) if abs(p) * Q_max >= 1 << 62 else q
                r = (qq * p) % D
                dc = np.minimum(r, D - r).astype(np.float64) / np.float64(D)
            else:
                t = qf * mid
                fr = np.mod(t, 1.0)
                dc = np.minimum(fr, 1.0 - fr)
            dist = np.maximum(dist, dc)
        blocks = _block_of(q)
        for b in np.unique(blocks):
            sel = blocks == b
            i = int(np.argmin(np.where(sel, dist, np.inf)))
            dmin, wit = float(dist[i]), (int(q[i]),)
            if int(b) not in raw or dmin < raw[int(b)][0]:
                raw[int(b)] = (dmin, wit)

    def sup_dist(wit: Tuple[int, ...]) -> Fraction:
        qv = wit[0]
        return max(
            _exact_dist(c.scale(qv), precision, cap) for c in x_full.coords
        )

    blocks_out: List[BlockRecord] = []
    for b in sorted(raw):
        _, wit = raw[b]
        dist = sup_dist(wit)
        if dist == 0:
            resonance = resonance or wit
            continue
        u_b = min(1 << b, Q_max)
        if u_b < 2:
            continue
        e = d * (-_log_fraction(dist) / math.log(u_b)) - 1
        h_lo = 0 if b == 0 else 1 << (b - 1)
        blocks_out.append(BlockRecord(b, h_lo, min(1 << b, Q_max), float(dist), wit, e))
    value, wits = _aggregate(blocks_out, resonance is not None, window)
    if resonance is not None:
        wits = [(resonance, INF)]
    est = ExponentEstimate(
        kind="omega_S",
        value=value,
        height=Q_max,
        requested_height=Q_max,
        blocks=blocks_out,
        best_witnesses=wits,
        is_exact_resonance=resonance is not None,
    )
    if not est.is_exact_resonance and est.value < 0:
        # omega_S >= 0 unconditionally (Dirichlet)
        est.notes.append("aggregate below the Dirichlet floor 0; clamped")
        est.value = 0.0
    return est


def check_transference(
    omega_D: float, omega_S: float, d: int, slack: float = 0.0
) -> CheckResult:
    """Sandwich omega_D/(d^2 + (d-1)*omega_D) <= omega_S <= omega_D, with
    the conventional reading at infinity (lower bound 1/(d-1) for d >= 2,
    upper bound vacuous)."""
    if omega_D < 0 or omega_S < 0:
        raise PreconditionViolated("exponents must be nonnegative")
    if d < 1:
        raise PreconditionViolated("d must be a positive integer")
    if omega_D == INF:
        lower = INF if d == 1 else 1.0 / (d - 1)
        upper = INF
    else:
        lower = omega_D / (d * d + (d - 1) * omega_D)
        upper = omega_D
    lo_ok = omega_S >= lower - slack or (lower == INF and omega_S == INF)
    hi_ok = upper == INF or omega_S <= upper + slack
    margin = None
    if lower != INF and upper != INF and omega_S != INF:
        margin = min(omega_S - (lower - slack), (upper + slack) - omega_S)
    return CheckResult(
        passed=lo_ok and hi_ok,
        margin=margin,
        detail={"lower": lower, "upper": upper, "omega_S": omega_S, "slack": slack},
    )


def vwa_witnesses(
    x_full: RealVector,
    epsilon: Union[float, Fraction],
    Q_max: int,
    precision: int = PRECISION_DEFAULT,
) -> List[int]:
    """All q <= Q_max with ||q*x|| < q^(-1/d - epsilon), increasing."""
    eps = Fraction(str(epsilon)) if isinstance(epsilon, float) else Fraction(epsilon)
    if eps <= 0:
        raise PreconditionViolated("epsilon must be positive")
    d = x_full.dim
    psi = PowerPsi(Fraction(1, d) + eps)
    return [int(q) for q in qualifying_q(x_full, psi, 0, Q_max, precision)]


def check_extension_monotonicity(
    x: RealVector,
    y: RealVector,
    H: int,
    precision: int = PRECISION_DEFAULT,
    cap: int = PRECISION_CAP,
    cell_budget: int = CELL_BUDGET_DEFAULT,
) -> CheckResult:
    """tau_D((x,y)) >= tau_D(x): the extension can only approximate better,
    witnessed by embedding n -> (n, 0)."""
    ext = RealVector.of(*(x.coords + y.coords))
    base = estimate_tau_D(x, H, precision, cap, cell_budget)
    full = estimate_tau_D(ext, base.height, precision, cap, cell_budget)
    # compare at the smaller effective height so the embedding is exact
    if full.height < base.height:
        base = estimate_tau_D(x, full.height, precision, cap, cell_budget)
    ok = full.value >= base.value or full.is_exact_resonance
    return CheckResult(
        passed=ok,
        margin=None if INF in (full.value, base.value) else full.value - base.value,
        detail={"tau_ext": full.value, "tau_base": base.value, "height": full.height},
    )


def block_rows(est: ExponentEstimate) -> List[List[str]]:
    """CSV rows (block, height range, block max exponent, witness vector)."""
    return [
        [
            str(r.b),
            f"({r.h_lo},{r.h_hi}]",
            repr(r.exponent),
            " ".join(str(v) for v in r.witness),
        ]
        for r in est.blocks
    ]
