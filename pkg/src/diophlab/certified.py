"""Certified evaluation of real points and the nearest-integer distance.

Reals are represented as ``a + b*sqrt(c)`` with rational ``a, b`` and a
nonnegative integer radicand ``c``; purely rational values have ``b == 0``.
Decimal literals are read as exact rationals.  Every inexact quantity is
returned as a dyadic-rational enclosure (:class:`CertifiedValue`), and
comparisons are resolved by enclosure separation with an exact fast path on
rational inputs, so threshold checks are decisions rather than estimates.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence, Tuple, Union

import gmpy2

from .errors import LiteralParseError, PrecisionExhausted

PRECISION_DEFAULT = 128
PRECISION_CAP = 4096

Rat = Union[int, Fraction]
Enclosure = Tuple[Fraction, Fraction]

_HALF = Fraction(1, 2)
_ONE = Fraction(1)


@dataclass(frozen=True)
class CertifiedValue:
    """A dyadic-rational enclosure ``[lower, upper]`` of a real number."""

    lower: Fraction
    upper: Fraction
    precision_bits: int

    def __post_init__(self) -> None:
        if self.lower > self.upper:
            raise ValueError("enclosure endpoints out of order")

    @property
    def exact(self) -> bool:
        return self.lower == self.upper

    @property
    def width(self) -> Fraction:
        return self.upper - self.lower

    @property
    def midpoint(self) -> Fraction:
        return (self.lower + self.upper) / 2

    def __float__(self) -> float:
        return float(self.midpoint)

    @staticmethod
    def point(value: Rat, precision_bits: int = PRECISION_DEFAULT) -> "CertifiedValue":
        v = Fraction(value)
        return CertifiedValue(v, v, precision_bits)


def sqrt_enclosure(c: int, prec: int) -> Enclosure:
    """Enclosure of sqrt(c) for integer c >= 0, width <= 2**-prec."""
    if c < 0:
        raise ValueError("negative radicand")
    scaled = c << (2 * prec)
    root = int(gmpy2.isqrt(scaled))
    lo = Fraction(root, 1 << prec)
    if root * root == scaled:
        return lo, lo
    return lo, Fraction(root + 1, 1 << prec)


def nth_root_enclosure(x: Fraction, r: int, prec: int) -> Enclosure:
    """Enclosure of x**(1/r) for x >= 0, integer r >= 1."""
    if x < 0:
        raise ValueError("negative radicand")
    if r == 1:
        return x, x
    num, den = x.numerator, x.denominator
    rn, en = gmpy2.iroot(num, r)
    rd, ed = gmpy2.iroot(den, r)
    if en and ed:
        v = Fraction(int(rn), int(rd))
        return v, v
    s = prec + 8
    t = (num << (r * s)) // den
    root = int(gmpy2.iroot(t, r)[0])
    return Fraction(root, 1 << s), Fraction(root + 1, 1 << s)


def pow_enclosure(base: Fraction, expo: Fraction, prec: int) -> Enclosure:
    """Enclosure of base**expo for base > 0 and rational expo."""
    if base <= 0:
        raise ValueError("base must be positive")
    p, r = expo.numerator, expo.denominator
    inner = base ** p  # Fraction, exact
    return nth_root_enclosure(inner, r, prec)


def mpfr_enclosure(fn: Callable[[], "gmpy2.mpfr"], prec: int) -> Enclosure:
    """Enclosure of a positive monotone MPFR expression via directed rounding.

    ``fn`` is evaluated twice under RoundDown/RoundUp contexts; this is sound
    whenever the expression is built from operations that MPFR rounds
    correctly and that are monotone in their intermediate results (products,
    quotients, log/exp/pow of positive operands).
    """
    with gmpy2.context(precision=prec + 16, round=gmpy2.RoundDown):
        lo = fn()
    with gmpy2.context(precision=prec + 16, round=gmpy2.RoundUp):
        hi = fn()
    flo = Fraction(*lo.as_integer_ratio())
    fhi = Fraction(*hi.as_integer_ratio())
    if flo > fhi:
        flo, fhi = fhi, flo
    return flo, fhi


_SQRT_RE = re.compile(
    r"^(?P<a>[+-]?[\d./]+)?(?P<sign>[+-])?(?:(?P<b>[\d./]+)\*)?sqrt\((?P<c>\d+)\)$"
)
_LIOUVILLE_RE = re.compile(r"^liouville10\((\d+)\)$")


def _parse_rat(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise LiteralParseError(
            f"cannot parse {text!r} as a rational or decimal literal"
        ) from exc


@dataclass(frozen=True)
class RealExpr:
    """A real number of the form a + b*sqrt(c).

    ``c`` is a nonnegative integer; when ``b != 0`` the radicand must not be
    a perfect square (perfect squares fold into the rational part at
    construction time via :meth:`make`).
    """

    a: Fraction
    b: Fraction = Fraction(0)
    c: int = 0

    def __post_init__(self) -> None:
        if self.b != 0:
            if self.c < 0:
                raise ValueError("negative radicand")
            root = int(gmpy2.isqrt(self.c))
            if root * root == self.c:
                raise ValueError("perfect-square radicand with b != 0; use make()")

    @staticmethod
    def make(a: Rat, b: Rat = 0, c: Rat = 0) -> "RealExpr":
        """Normalize a + b*sqrt(c) with rational c into canonical form."""
        a, b, c = Fraction(a), Fraction(b), Fraction(c)
        if b == 0 or c == 0:
            return RealExpr(a)
        if c < 0:
            raise ValueError("negative radicand")
        # b*sqrt(cn/cd) == (b/cd)*sqrt(cn*cd); fold perfect squares.
        ci = c.numerator * c.denominator
        b = b / c.denominator
        root = int(gmpy2.isqrt(ci))
        if root * root == ci:
            return RealExpr(a + b * root)
        return RealExpr(a, b, ci)

    @staticmethod
    def rational(value: Rat) -> "RealExpr":
        return RealExpr(Fraction(value))

    @property
    def kind(self) -> str:
        return "rational" if self.b == 0 else "quadratic"

    @property
    def is_rational(self) -> bool:
        return self.b == 0

    def exact_fraction(self) -> Optional[Fraction]:
        return self.a if self.b == 0 else None

    def enclosure(self, prec: int) -> Enclosure:
        if self.b == 0:
            return self.a, self.a
        shift = prec + max(0, self.b.numerator.bit_length()) + 2
        slo, shi = sqrt_enclosure(self.c, shift)
        if self.b > 0:
            return self.a + self.b * slo, self.a + self.b * shi
        return self.a + self.b * shi, self.a + self.b * slo

    def scale(self, q: Rat) -> "RealExpr":
        q = Fraction(q)
        if q == 0 or self.b == 0:
            return RealExpr(self.a * q)
        return RealExpr(self.a * q, self.b * q, self.c)

    def shift(self, gamma: Rat) -> "RealExpr":
        return RealExpr(self.a + Fraction(gamma), self.b, self.c)

    def __str__(self) -> str:
        if self.b == 0:
            return str(self.a)
        return f"{self.a}+{self.b}*sqrt({self.c})"

    def __float__(self) -> float:
        if self.b == 0:
            return float(self.a)
        lo, hi = self.enclosure(64)
        return float((lo + hi) / 2)


def parse_real(text: str) -> RealExpr:
    """Parse a coordinate literal.

    Accepted forms: ``p/q``, decimal strings (read exactly), quadratic
    expressions ``a+b*sqrt(c)`` (either part optional), and the named
    constants ``sqrt2m1``, ``golden`` and ``liouville10(n)``.
    """
    text = text.strip().replace(" ", "")
    if not text:
        raise LiteralParseError("empty real literal")
    if text == "sqrt2m1":
        return RealExpr.make(-1, 1, 2)
    if text == "golden":
        return RealExpr.make(Fraction(-1, 2), Fraction(1, 2), 5)
    m = _LIOUVILLE_RE.match(text)
    if m:
        n = int(m.group(1))
        if n < 1:
            raise LiteralParseError("liouville10(n) requires n >= 1")
        return RealExpr.rational(sum(Fraction(1, 10 ** math.factorial(j)) for j in range(1, n + 1)))
    if "sqrt" in text:
        m = _SQRT_RE.match(text)
        if not m:
            raise LiteralParseError(
                f"bad quadratic literal {text!r}; expected a+b*sqrt(c)"
            )
        a = _parse_rat(m.group("a")) if m.group("a") else Fraction(0)
        b = _parse_rat(m.group("b")) if m.group("b") else Fraction(1)
        if m.group("sign") == "-":
            b = -b
        return RealExpr.make(a, b, int(m.group("c")))
    return RealExpr.rational(_parse_rat(text))


@dataclass(frozen=True)
class RealVector:
    """An ordered point x in R^ell with certified coordinates."""

    coords: Tuple[RealExpr, ...]

    def __post_init__(self) -> None:
        if len(self.coords) < 1:
            raise ValueError("dimension must be at least 1")

    @staticmethod
    def of(*coords: Union[RealExpr, Rat, str]) -> "RealVector":
        out = []
        for c in coords:
            if isinstance(c, RealExpr):
                out.append(c)
            elif isinstance(c, str):
                out.append(parse_real(c))
            else:
                out.append(RealExpr.rational(c))
        return RealVector(tuple(out))

    @property
    def dim(self) -> int:
        return len(self.coords)

    @property
    def is_rational(self) -> bool:
        return all(c.is_rational for c in self.coords)

    def __str__(self) -> str:
        return ",".join(str(c) for c in self.coords)


def parse_vector(text: str) -> RealVector:
    parts = [p for p in text.split(",") if p.strip()]
    if not parts:
        raise LiteralParseError("empty vector literal")
    return RealVector(tuple(parse_real(p) for p in parts))


def _frac_dist_to_int(v: Fraction) -> Fraction:
    f = v - math.floor(v)
    return min(f, 1 - f)


def _dist_image(lo: Fraction, hi: Fraction) -> Enclosure:
    """Exact image of [lo, hi] under the tent map t -> |t - round(t)|."""
    contains_int = math.floor(hi) >= lo
    contains_half = math.floor(hi - _HALF) >= lo - _HALF
    dlo = Fraction(0) if contains_int else min(_frac_dist_to_int(lo), _frac_dist_to_int(hi))
    dhi = _HALF if contains_half else max(_frac_dist_to_int(lo), _frac_dist_to_int(hi))
    return dlo, dhi


def nearest_int_dist(
    t: RealExpr,
    precision: int = PRECISION_DEFAULT,
    cap: int = PRECISION_CAP,
) -> CertifiedValue:
    """Certified enclosure of min_{m in Z} |t - m|, a value in [0, 1/2].

    Exact (a degenerate point enclosure) when ``t`` is rational.
    """
    fr = t.exact_fraction()
    if fr is not None:
        return CertifiedValue.point(_frac_dist_to_int(fr), precision)
    p = max(precision, 8)
    while True:
        lo, hi = t.enclosure(p + 4)
        dlo, dhi = _dist_image(lo, hi)
        if dhi - dlo <= Fraction(1, 1 << precision):
            return CertifiedValue(dlo, dhi, precision)
        if p >= cap:
            raise PrecisionExhausted(
                f"nearest_int_dist enclosure stuck at width {float(dhi - dlo)!r}"
            )
        p *= 2


def sup_norm_dist(
    v: RealVector,
    q: int,
    precision: int = PRECISION_DEFAULT,
    cap: int = PRECISION_CAP,
    gamma: Optional[Sequence[Rat]] = None,
) -> CertifiedValue:
    """Certified enclosure of ||q*v|| = max_i min_m |q*v_i + gamma_i - m|."""
    if q < 0:
        raise ValueError("q must be nonnegative")
    best_lo = Fraction(0)
    best_hi = Fraction(0)
    prec_used = precision
    for i, coord in enumerate(v.coords):
        expr = coord.scale(q)
        if gamma is not None:
            expr = expr.shift(gamma[i])
        cv = nearest_int_dist(expr, precision, cap)
        best_lo = max(best_lo, cv.lower)
        best_hi = max(best_hi, cv.upper)
        prec_used = min(prec_used, cv.precision_bits)
    if best_hi < best_lo:
        best_hi = best_lo
    return CertifiedValue(best_lo, best_hi, prec_used)


class Threshold:
    """A comparison threshold with an optional exact value and refinable
    enclosures; unifies rational deltas, algebraic powers and psi values."""

    def __init__(
        self,
        enclosure_fn: Callable[[int], Enclosure],
        exact: Optional[Fraction] = None,
        label: str = "",
    ):
        self._fn = enclosure_fn
        self.exact = exact
        self.label = label

    @staticmethod
    def from_fraction(value: Rat, label: str = "") -> "Threshold":
        v = Fraction(value)
        return Threshold(lambda prec: (v, v), exact=v, label=label or str(v))

    def enclosure(self, prec: int) -> Enclosure:
        if self.exact is not None:
            return self.exact, self.exact
        return self._fn(prec)

    def __repr__(self) -> str:
        return f"Threshold({self.label or self._fn})"


def algebraic_power(base: Rat, expo: Rat, label: str = "") -> Threshold:
    """Threshold base**expo (base > 0, rational exponent), e.g. N**(-1/tau)."""
    base_f, expo_f = Fraction(base), Fraction(expo)
    if base_f <= 0:
        raise ValueError("base must be positive")
    exact: Optional[Fraction] = None
    lo, hi = pow_enclosure(base_f, expo_f, 64)
    if lo == hi:
        exact = lo
    return Threshold(
        lambda prec: pow_enclosure(base_f, expo_f, prec),
        exact=exact,
        label=label or f"{base}^{expo}",
    )


def certify_less(
    left: Callable[[int], Enclosure],
    right: Callable[[int], Enclosure],
    precision: int = PRECISION_DEFAULT,
    cap: int = PRECISION_CAP,
) -> bool:
    """Decide left < right by refinement; ties resolve to False only when
    both sides become exact.  Raises PrecisionExhausted otherwise."""
    p = max(precision, 16)
    while True:
        llo, lhi = left(p)
        rlo, rhi = right(p)
        if lhi < rlo:
            return True
        if llo >= rhi:
            return False
        if llo == lhi and rlo == rhi:
            return llo < rlo
        if p >= cap:
            raise PrecisionExhausted(
                f"comparison undecided at {p} bits: "
                f"[{float(llo)},{float(lhi)}] vs [{float(rlo)},{float(rhi)}]"
            )
        p *= 2


def dist_less_than(
    x: RealVector,
    q: int,
    threshold: Threshold,
    precision: int = PRECISION_DEFAULT,
    cap: int = PRECISION_CAP,
    gamma: Optional[Sequence[Rat]] = None,
) -> bool:
    """Certified strict comparison ||q*x + gamma|| < threshold."""
    def left(p: int) -> Enclosure:
        cv = sup_norm_dist(x, q, p, cap, gamma=gamma)
        return cv.lower, cv.upper

    return certify_less(left, threshold.enclosure, precision, cap)


def float_with_error(expr: RealExpr) -> Tuple[float, float]:
    """A float approximation of ``expr`` plus a bound on its absolute error."""
    lo, hi = expr.enclosure(80)
    mid = float((lo + hi) / 2)
    err = float(hi - lo) + abs(mid) * 2.0 ** -50 + 2.0 ** -70
    return mid, err
