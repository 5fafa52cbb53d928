"""Approximating functions: presets, certified evaluation, and the
divergence / regularity classifiers.

Presets cover the power family q^(-a), the logarithmic refinement
q^(-a)*(log q)^(-b), constants, the safety function (q*(log q)^2)^(-1/d),
pointwise maxima, and step functions read from two-column tables.  All
presets are nonincreasing by construction; tables are validated.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple, Union

import gmpy2

from .certified import (
    PRECISION_CAP,
    PRECISION_DEFAULT,
    CertifiedValue,
    Enclosure,
    RealVector,
    Threshold,
    certify_less,
    mpfr_enclosure,
    pow_enclosure,
    sup_norm_dist,
)
from .errors import LiteralParseError, PrecisionExhausted

Rat = Union[int, Fraction]


class ApproxFunction:
    """Base class; subclasses implement certified pointwise evaluation."""

    kind = "abstract"

    def enclosure(self, q: int, prec: int) -> Enclosure:
        raise NotImplementedError

    def exact_value(self, q: int) -> Optional[Fraction]:
        """Exact value when representable, else None."""
        return None

    def pow_enclosure(self, q: int, power: Rat, prec: int) -> Enclosure:
        """Enclosure of psi(q)**power; overridden where an exact or tighter
        route exists (e.g. q^(-a) raised to d)."""
        power = Fraction(power)
        lo, hi = self.enclosure(q, prec + 8)
        if power == 0:
            return Fraction(1), Fraction(1)
        if lo == hi:
            return pow_enclosure(lo, power, prec) if lo > 0 else (Fraction(0), Fraction(0))
        if lo <= 0:
            lo = Fraction(0)
            plo = Fraction(0)
        else:
            plo = pow_enclosure(lo, power, prec)[0]
        phi_ = pow_enclosure(hi, power, prec)[1] if hi > 0 else Fraction(0)
        if power > 0:
            return plo, phi_
        return phi_, plo

    def pow_exact(self, q: int, power: Rat) -> Optional[Fraction]:
        v = self.exact_value(q)
        if v is None:
            return None
        power = Fraction(power)
        if v == 0:
            return Fraction(0)
        lo, hi = pow_enclosure(v, power, 32)
        return lo if lo == hi else None

    def threshold_at(self, q: int) -> Threshold:
        return Threshold(
            lambda prec: self.enclosure(q, prec),
            exact=self.exact_value(q),
            label=f"{self}({q})",
        )

    def min_domain(self) -> int:
        return 1


@dataclass(frozen=True)
class PowerPsi(ApproxFunction):
    """psi(q) = q**(-a) with rational a > 0."""

    a: Fraction
    kind = "power"

    def __post_init__(self) -> None:
        if self.a <= 0:
            raise ValueError("power exponent must be positive")

    def enclosure(self, q: int, prec: int) -> Enclosure:
        return pow_enclosure(Fraction(q), -self.a, prec)

    def exact_value(self, q: int) -> Optional[Fraction]:
        lo, hi = pow_enclosure(Fraction(q), -self.a, 32)
        return lo if lo == hi else None

    def pow_enclosure(self, q: int, power: Rat, prec: int) -> Enclosure:
        return pow_enclosure(Fraction(q), -self.a * Fraction(power), prec)

    def pow_exact(self, q: int, power: Rat) -> Optional[Fraction]:
        lo, hi = pow_enclosure(Fraction(q), -self.a * Fraction(power), 32)
        return lo if lo == hi else None

    def __str__(self) -> str:
        return f"q^-{self.a}"


@dataclass(frozen=True)
class PowerLogPsi(ApproxFunction):
    """psi(q) = q**(-a) * (log q)**(-b), defined for q >= 2."""

    a: Fraction
    b: Fraction
    kind = "power-log"

    def __post_init__(self) -> None:
        if self.a < 0 or self.b < 0 or (self.a == 0 and self.b == 0):
            raise ValueError("power-log exponents must be nonnegative, not both zero")

    def min_domain(self) -> int:
        return 2

    def enclosure(self, q: int, prec: int) -> Enclosure:
        if q < 2:
            raise ValueError("power-log kind needs q >= 2 (log singularity)")
        a, b = self.a, self.b

        def expr() -> "gmpy2.mpfr":
            qa = gmpy2.mpfr(q)
            return gmpy2.mpfr(1) / (
                qa ** gmpy2.mpq(a.numerator, a.denominator)
                * gmpy2.log(qa) ** gmpy2.mpq(b.numerator, b.denominator)
            )

        return mpfr_enclosure(expr, prec)

    def __str__(self) -> str:
        return f"q^-{self.a}*log^-{self.b}"


@dataclass(frozen=True)
class ConstantPsi(ApproxFunction):
    """psi(q) = c with c >= 0."""

    c: Fraction
    kind = "constant"

    def __post_init__(self) -> None:
        if self.c < 0:
            raise ValueError("constant must be nonnegative")

    def enclosure(self, q: int, prec: int) -> Enclosure:
        return self.c, self.c

    def exact_value(self, q: int) -> Optional[Fraction]:
        return self.c

    def pow_exact(self, q: int, power: Rat) -> Optional[Fraction]:
        if self.c == 0:
            return Fraction(0)
        lo, hi = pow_enclosure(self.c, Fraction(power), 32)
        return lo if lo == hi else None

    def __str__(self) -> str:
        return f"const:{self.c}"


@dataclass(frozen=True)
class PhiPsi(ApproxFunction):
    """The safety function (q*(log q)**2)**(-1/d); phi(1) is pinned to
    phi(2) to keep the function nonincreasing across the log singularity."""

    d: int
    kind = "phi"

    def __post_init__(self) -> None:
        if self.d < 1:
            raise ValueError("phi dimension must be positive")

    def enclosure(self, q: int, prec: int) -> Enclosure:
        q = max(q, 2)

        def expr() -> "gmpy2.mpfr":
            qa = gmpy2.mpfr(q)
            inner = qa * gmpy2.log(qa) ** 2
            return inner ** gmpy2.mpq(-1, self.d)

        return mpfr_enclosure(expr, prec)

    def __str__(self) -> str:
        return f"phi:d={self.d}"


@dataclass(frozen=True)
class MaxPsi(ApproxFunction):
    """Pointwise maximum of two approximating functions."""

    f: ApproxFunction
    g: ApproxFunction
    kind = "pointwise-max"

    def min_domain(self) -> int:
        return max(self.f.min_domain(), self.g.min_domain())

    def enclosure(self, q: int, prec: int) -> Enclosure:
        flo, fhi = self.f.enclosure(q, prec)
        glo, ghi = self.g.enclosure(q, prec)
        return max(flo, glo), max(fhi, ghi)

    def exact_value(self, q: int) -> Optional[Fraction]:
        fv, gv = self.f.exact_value(q), self.g.exact_value(q)
        if fv is not None and gv is not None:
            return max(fv, gv)
        return None

    def __str__(self) -> str:
        return f"max({self.f},{self.g})"


@dataclass(frozen=True)
class TablePsi(ApproxFunction):
    """Step function from explicit (q, value) pairs: psi(q) is the value at
    the largest tabulated point <= q.  Must be nonincreasing."""

    points: Tuple[Tuple[int, Fraction], ...]
    kind = "truncated-table"

    def __post_init__(self) -> None:
        if not self.points:
            raise ValueError("empty table")
        prev_q, prev_v = None, None
        for q, v in self.points:
            if q < 1 or v < 0:
                raise ValueError("table entries need q >= 1 and value >= 0")
            if prev_q is not None:
                if q <= prev_q:
                    raise ValueError("table q values must be strictly increasing")
                if v > prev_v:
                    raise ValueError("table values must be nonincreasing")
            prev_q, prev_v = q, v

    def _lookup(self, q: int) -> Fraction:
        val = self.points[0][1]
        for tq, tv in self.points:
            if tq > q:
                break
            val = tv
        return val

    def enclosure(self, q: int, prec: int) -> Enclosure:
        v = self._lookup(q)
        return v, v

    def exact_value(self, q: int) -> Optional[Fraction]:
        return self._lookup(q)

    def __str__(self) -> str:
        return f"table[{len(self.points)}]"


def parse_psi(text: str) -> ApproxFunction:
    """Parse an approximating-function literal.

    Grammar: ``q^-A``, ``q^-A*log^-B``, ``const:C``, ``phi:d=D``,
    ``max(F,G)``, ``table:PATH`` (two-column CSV q,value).
    """
    text = text.strip()
    if not text:
        raise LiteralParseError("empty psi literal")
    try:
        if text.startswith("max(") and text.endswith(")"):
            inner = text[4:-1]
            depth = 0
            for i, ch in enumerate(inner):
                if ch == "(":
                    depth += 1
                elif ch == ")":
                    depth -= 1
                elif ch == "," and depth == 0:
                    return MaxPsi(parse_psi(inner[:i]), parse_psi(inner[i + 1:]))
            raise LiteralParseError(f"max(A,B) needs two arguments: {text!r}")
        if text.startswith("const:"):
            return ConstantPsi(Fraction(text[6:]))
        if text.startswith("phi:d="):
            return PhiPsi(int(text[6:]))
        if text.startswith("table:"):
            return load_table_psi(text[6:])
        if text.startswith("q^-"):
            body = text[3:]
            if "*log^-" in body:
                a_txt, b_txt = body.split("*log^-", 1)
                return PowerLogPsi(Fraction(a_txt), Fraction(b_txt))
            return PowerPsi(Fraction(body))
    except LiteralParseError:
        raise
    except (ValueError, ZeroDivisionError) as exc:
        raise LiteralParseError(f"bad psi literal {text!r}: {exc}") from exc
    raise LiteralParseError(
        f"unrecognized psi literal {text!r}; expected q^-A, q^-A*log^-B, "
        "const:C, phi:d=D, max(A,B) or table:PATH"
    )


def load_table_psi(path: str) -> TablePsi:
    points: List[Tuple[int, Fraction]] = []
    try:
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].strip().startswith("#") or row[0].strip() == "q":
                    continue
                points.append((int(row[0]), Fraction(row[1])))
    except OSError as exc:
        raise LiteralParseError(f"cannot read table {path!r}: {exc}") from exc
    except (ValueError, ZeroDivisionError, IndexError) as exc:
        raise LiteralParseError(f"bad table row in {path!r}: {exc}") from exc
    try:
        return TablePsi(tuple(points))
    except ValueError as exc:
        raise LiteralParseError(f"invalid table {path!r}: {exc}") from exc


def eval_psi(
    psi: ApproxFunction, q: int, precision: int = PRECISION_DEFAULT
) -> CertifiedValue:
    """Certified enclosure of psi(q); exact where the preset allows."""
    if q < 1:
        raise ValueError("q must be a positive integer")
    if q < psi.min_domain():
        raise ValueError(f"{psi} undefined at q={q} (log singularity)")
    exact = psi.exact_value(q)
    if exact is not None:
        return CertifiedValue.point(exact, precision)
    lo, hi = psi.enclosure(q, precision)
    return CertifiedValue(lo, hi, precision)


def psi_x(
    psi: ApproxFunction,
    x: RealVector,
    q: int,
    precision: int = PRECISION_DEFAULT,
    cap: int = PRECISION_CAP,
) -> CertifiedValue:
    """The indicator-weighted value: psi(q) when ||q*x|| < psi(q) is
    certified, 0 when >= is certified."""
    def left(p: int) -> Enclosure:
        cv = sup_norm_dist(x, q, p, cap)
        return cv.lower, cv.upper

    thr = psi.threshold_at(q)
    if certify_less(left, thr.enclosure, precision, cap):
        return eval_psi(psi, q, precision)
    return CertifiedValue.point(0, precision)


@dataclass
class DivergenceVerdict:
    """Outcome of the dyadic condensation probe for sum psi(q)**d."""

    verdict: str  # diverges | converges | inconclusive
    partial_sums: List[Tuple[int, Union[Fraction, float]]]
    growth_slope: float
    increments: List[Union[Fraction, float]] = field(default_factory=list)


def _ratio_tail(values: List[float], window: int) -> List[float]:
    tail = values[-window:]
    return [
        tail[i + 1] / tail[i] if tail[i] > 0 else 0.0
        for i in range(len(tail) - 1)
    ]


def _divergence_verdict(
    incs: List[float], floor: float, converge_ratio: float, window: int
) -> str:
    if all(r <= converge_ratio for r in _ratio_tail(incs, window)):
        return "converges"
    # second condensation level: t_i = 2^i * a_{2^i}
    level2 = []
    i = 0
    while (1 << i) <= len(incs):
        level2.append((1 << i) * incs[(1 << i) - 1])
        i += 1
    if len(level2) >= 3:
        w = min(window, 3)
        ratios2 = _ratio_tail(level2, w + 1)
        if all(r <= converge_ratio for r in ratios2):
            return "converges"
        if all(t >= floor for t in level2[-w:]):
            return "diverges"
    if all(v >= floor for v in incs[-window:]):
        return "diverges"
    return "inconclusive"


def classify_divergence(
    psi: ApproxFunction,
    d: int,
    M_max: int = 40,
    diverge_floor: float = 1e-6,
    converge_ratio: float = 0.9,
    window: int = 5,
) -> DivergenceVerdict:
    """Condensation probe: partial sums of 2**m * psi(2**m)**d for m <= M.

    Verdict rule (configurable): increment ratios at most ``converge_ratio``
    across the last ``window`` steps read as convergence; otherwise the rule
    is applied once more to the doubly-condensed terms 2**i * a(2**i), which
    separates slowly-decaying tails such as 1/m**2 from genuinely divergent
    ones; a tail of increments all at least ``diverge_floor`` that is not
    decaying reads as divergence.  For the pure power family q**(-a) the
    verdict is decided exactly (diverges iff a*d <= 1); the partial sums are
    still reported from data.  Increment values are exact whenever the
    preset's d-th power is exactly representable.
    """
    if M_max < 8:
        raise ValueError("M_max must be at least 8")
    increments: List[Union[Fraction, float]] = []
    sums: List[Tuple[int, Union[Fraction, float]]] = []
    total: Union[Fraction, float] = Fraction(0)
    for m in range(1, M_max + 1):
        q = 1 << m
        exact = psi.pow_exact(q, d)
        if exact is not None:
            inc: Union[Fraction, float] = exact * q
        else:
            lo, hi = psi.pow_enclosure(q, Fraction(d), 64)
            inc = float((lo + hi) / 2) * q
        if isinstance(total, Fraction) and isinstance(inc, Fraction):
            total = total + inc
        else:
            total = float(total) + float(inc)
        increments.append(inc)
        sums.append((m, total))
    verdict = _divergence_verdict(
        [float(v) for v in increments], diverge_floor, converge_ratio, window
    )
    if isinstance(psi, PowerPsi):
        verdict = "diverges" if psi.a * d <= 1 else "converges"
    elif isinstance(psi, ConstantPsi):
        verdict = "diverges" if psi.c > 0 else "converges"
    span = float(sums[-1][1]) - float(sums[-window][1])
    slope = span / (window - 1) if window > 1 else 0.0
    return DivergenceVerdict(verdict, sums, slope, increments)


def check_u_regular(
    psi: ApproxFunction,
    k: int,
    j_range: Sequence[int],
    precision: int = PRECISION_DEFAULT,
    cap: int = PRECISION_CAP,
) -> Tuple[bool, Fraction]:
    """Check Psi(k**(j+1)) <= (1/k) * Psi(k**j) over j_range, Psi = psi/q.

    Since Psi(k^(j+1))/Psi(k^j) = psi(k^(j+1)) / (k*psi(k^j)), regularity
    with kappa = 1/k reduces to certifying psi(k^(j+1)) <= psi(k^j) at every
    tested j.  Returns the verdict and the largest witnessed ratio bound.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    js = list(j_range)
    if not js:
        raise ValueError("empty j range")
    holds = True
    worst = Fraction(0)
    for j in js:
        q0, q1 = k ** j, k ** (j + 1)
        if q0 < psi.min_domain():
            continue
        v0, v1 = psi.exact_value(q0), psi.exact_value(q1)
        if v0 is not None and v1 is not None:
            ok = v1 <= v0
            ratio = Fraction(v1, k * v0) if v0 > 0 else Fraction(0)
        else:
            try:
                strictly_less = certify_less(
                    lambda p: psi.enclosure(q1, p),
                    lambda p: psi.enclosure(q0, p),
                    precision,
                    cap,
                )
            except PrecisionExhausted:
                # could not separate: values provably within 2^-cap, so the
                # nonincreasing preset gives equality up to that width
                strictly_less = True
            ok = strictly_less or psi.enclosure(q1, 64)[1] <= psi.enclosure(q0, 64)[1]
            lo0 = psi.enclosure(q0, precision)[0]
            hi1 = psi.enclosure(q1, precision)[1]
            ratio = Fraction(hi1, k * lo0) if lo0 > 0 else Fraction(0)
        holds = holds and ok
        worst = max(worst, min(ratio, Fraction(1, k)) if ok else ratio)
    return holds, worst
