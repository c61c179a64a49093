"""Two's-complement fixed-point numbers with configurable rounding and overflow.

Scalar values use Python integers so every intermediate is exact. The
array kernels in `_kernels` implement the same rounding rules and are
checked against these functions bit for bit.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction


class Rounding(str, Enum):
    TRUNCATE = "truncate"          # floor toward -inf, as a plain right shift
    HALF_UP = "half_up"            # nearest, ties toward +inf
    NEAREST_EVEN = "nearest_even"  # nearest, ties to even


class Overflow(str, Enum):
    WRAP = "wrap"
    SATURATE = "saturate"
    TRAP = "trap"


ROUNDING_CODE = {Rounding.TRUNCATE: 0, Rounding.HALF_UP: 1, Rounding.NEAREST_EVEN: 2}
OVERFLOW_CODE = {Overflow.WRAP: 0, Overflow.SATURATE: 1, Overflow.TRAP: 2}

# Formats wider than this only appear as exact intermediates.
MAX_STORED_WIDTH = 64
MAX_WIDTH = 256


class FixedPointOverflow(ArithmeticError):
    pass


@dataclass(frozen=True)
class FixedPointFormat:
    """integer_bits includes the sign bit; width = integer_bits + fractional_bits."""

    integer_bits: int
    fractional_bits: int

    def __post_init__(self):
        if not 2 <= self.width <= MAX_WIDTH:
            raise ValueError(f"format width {self.width} out of range")

    @property
    def width(self) -> int:
        return self.integer_bits + self.fractional_bits

    @property
    def min_raw(self) -> int:
        return -(1 << (self.width - 1))

    @property
    def max_raw(self) -> int:
        return (1 << (self.width - 1)) - 1

    @property
    def lsb(self) -> float:
        return 2.0 ** -self.fractional_bits

    def shifted(self, s: int) -> "FixedPointFormat":
        """Same width with the binary point moved s bits left (value range / 2^s)."""
        return FixedPointFormat(self.integer_bits - s, self.fractional_bits + s)

    def with_width(self, width: int) -> "FixedPointFormat":
        """Keep the integer bits, change the precision."""
        return FixedPointFormat(self.integer_bits, width - self.integer_bits)

    def check_stored(self) -> "FixedPointFormat":
        if self.width > MAX_STORED_WIDTH:
            raise ValueError(f"stored formats are limited to {MAX_STORED_WIDTH} bits, got {self.width}")
        return self

    @classmethod
    def parse(cls, text: str) -> "FixedPointFormat":
        """Accepts "w:i:f" or "w(i,f)"."""
        m = re.fullmatch(r"\s*(\d+)\s*[:(]\s*(-?\d+)\s*[:,]\s*(-?\d+)\s*\)?\s*", text)
        if not m:
            raise ValueError(f"cannot parse fixed-point format {text!r}")
        w, i, f = map(int, m.groups())
        if w != i + f:
            raise ValueError(f"format {text!r}: width {w} != {i} + {f}")
        return cls(i, f).check_stored()

    def __str__(self) -> str:
        return f"{self.width}:{self.integer_bits}:{self.fractional_bits}"


@dataclass
class OverflowPolicy:
    mode: Overflow = Overflow.WRAP
    count: int = 0

    def fit(self, raw: int, fmt: FixedPointFormat) -> int:
        if fmt.min_raw <= raw <= fmt.max_raw:
            return raw
        self.count += 1
        if self.mode is Overflow.TRAP:
            raise FixedPointOverflow(f"value {raw} does not fit {fmt}")
        if self.mode is Overflow.SATURATE:
            return fmt.max_raw if raw > 0 else fmt.min_raw
        w = fmt.width
        return ((raw + (1 << (w - 1))) % (1 << w)) - (1 << (w - 1))

    def merge(self, other: "OverflowPolicy") -> None:
        self.count += other.count


def _policy(policy):
    return OverflowPolicy() if policy is None else policy


def round_shift(r: int, s: int, rounding: Rounding = Rounding.TRUNCATE) -> int:
    """r / 2^s rounded to an integer. Negative s is an exact left shift."""
    if s <= 0:
        return r << -s
    rounding = Rounding(rounding)
    if rounding is Rounding.TRUNCATE:
        return r >> s
    if rounding is Rounding.HALF_UP:
        return (r + (1 << (s - 1))) >> s
    q = r >> s
    rem = r - (q << s)
    half = 1 << (s - 1)
    if rem > half or (rem == half and q & 1):
        q += 1
    return q


@dataclass(frozen=True)
class FixedPointValue:
    raw: int
    fmt: FixedPointFormat

    def __post_init__(self):
        if not self.fmt.min_raw <= self.raw <= self.fmt.max_raw:
            raise ValueError(f"raw {self.raw} out of range for {self.fmt}")

    @property
    def exact(self) -> Fraction:
        return Fraction(self.raw, 1 << self.fmt.fractional_bits) if self.fmt.fractional_bits >= 0 \
            else Fraction(self.raw * (1 << -self.fmt.fractional_bits))

    @property
    def value(self) -> float:
        return float(self.exact)

    def __float__(self):
        return self.value


def quantize(x, fmt: FixedPointFormat, rounding: Rounding = Rounding.TRUNCATE,
             policy: OverflowPolicy | None = None) -> FixedPointValue:
    """Nearest representable value (per rounding rule) of a real or rational x."""
    q = Fraction(x) * (Fraction(2) ** fmt.fractional_bits)
    num, den = q.numerator, q.denominator
    # den is a power of two for binary inputs; handle general rationals too
    rounding = Rounding(rounding)
    fl = num // den
    rem = Fraction(num - fl * den, den)
    if rounding is Rounding.TRUNCATE:
        r = fl
    elif rem > Fraction(1, 2) or (rem == Fraction(1, 2) and (rounding is Rounding.HALF_UP or fl & 1)):
        r = fl + 1
    else:
        r = fl
    return FixedPointValue(_policy(policy).fit(r, fmt), fmt)


def requantize(v: FixedPointValue, fmt: FixedPointFormat, rounding: Rounding = Rounding.TRUNCATE,
               policy: OverflowPolicy | None = None) -> FixedPointValue:
    r = round_shift(v.raw, v.fmt.fractional_bits - fmt.fractional_bits, rounding)
    return FixedPointValue(_policy(policy).fit(r, fmt), fmt)


def _same(a: FixedPointValue, b: FixedPointValue):
    if a.fmt != b.fmt:
        raise ValueError(f"format mismatch {a.fmt} vs {b.fmt}")


def fp_add(a: FixedPointValue, b: FixedPointValue, policy: OverflowPolicy | None = None) -> FixedPointValue:
    _same(a, b)
    return FixedPointValue(_policy(policy).fit(a.raw + b.raw, a.fmt), a.fmt)


def fp_sub(a: FixedPointValue, b: FixedPointValue, policy: OverflowPolicy | None = None) -> FixedPointValue:
    _same(a, b)
    return FixedPointValue(_policy(policy).fit(a.raw - b.raw, a.fmt), a.fmt)


def product_format(a: FixedPointFormat, b: FixedPointFormat) -> FixedPointFormat:
    """Format holding any product of a and b exactly."""
    return FixedPointFormat(a.integer_bits + b.integer_bits, a.fractional_bits + b.fractional_bits)


def fp_mul(a: FixedPointValue, b: FixedPointValue, out_fmt: FixedPointFormat | None = None,
           rounding: Rounding = Rounding.TRUNCATE, policy: OverflowPolicy | None = None) -> FixedPointValue:
    """Full-precision product, then rounded into out_fmt (exact if out_fmt is None)."""
    full = product_format(a.fmt, b.fmt)
    p = FixedPointValue(a.raw * b.raw, full)
    if out_fmt is None:
        return p
    return requantize(p, out_fmt, rounding, policy)


def widen(v: FixedPointValue, extra_int: int = 1) -> FixedPointValue:
    return FixedPointValue(v.raw, FixedPointFormat(v.fmt.integer_bits + extra_int, v.fmt.fractional_bits))


@dataclass(frozen=True)
class FixedComplex:
    re: FixedPointValue
    im: FixedPointValue

    @property
    def value(self) -> complex:
        return complex(self.re.value, self.im.value)


@dataclass(frozen=True)
class GaussTwiddle:
    """Constant c + jd stored as (c - d, c + d, c)."""

    c_minus_d: FixedPointValue
    c_plus_d: FixedPointValue
    c: FixedPointValue
    d: FixedPointValue = field(compare=False)

    @property
    def value(self) -> complex:
        return complex(self.c.value, self.d.value)


def make_twiddle(w: complex, fmt: FixedPointFormat, rounding: Rounding = Rounding.HALF_UP) -> GaussTwiddle:
    """Quantize c and d at fmt; c +- d are formed exactly with one extra integer bit."""
    c = quantize(w.real, fmt, rounding, OverflowPolicy(Overflow.TRAP))
    d = quantize(w.imag, fmt, rounding, OverflowPolicy(Overflow.TRAP))
    wide = FixedPointFormat(fmt.integer_bits + 1, fmt.fractional_bits)
    return GaussTwiddle(
        FixedPointValue(c.raw - d.raw, wide),
        FixedPointValue(c.raw + d.raw, wide),
        c,
        d,
    )


def gauss_cmul(x: FixedComplex, w: GaussTwiddle, out_fmt: FixedPointFormat,
               rounding: Rounding = Rounding.TRUNCATE, policy: OverflowPolicy | None = None,
               work_fmt: FixedPointFormat | None = None) -> FixedComplex:
    """(A + jB)(C + jD) with three real multiplications.

    Z = C(A - B), X = (C - D)B + Z, Y = (C + D)A - Z. With work_fmt None the
    products are kept exact and each output is rounded once.
    """
    policy = _policy(policy)
    a, b = x.re, x.im
    amb = fp_sub(widen(a), widen(b), policy)
    z = fp_mul(w.c, amb, work_fmt, rounding, policy)
    p1 = fp_mul(w.c_minus_d, b, work_fmt, rounding, policy)
    p2 = fp_mul(w.c_plus_d, a, work_fmt, rounding, policy)
    return FixedComplex(_sum_round(p1, z, +1, out_fmt, rounding, policy),
                        _sum_round(p2, z, -1, out_fmt, rounding, policy))


def _sum_round(p: FixedPointValue, z: FixedPointValue, sign: int, out_fmt, rounding, policy):
    f = max(p.fmt.fractional_bits, z.fmt.fractional_bits)
    raw = (p.raw << (f - p.fmt.fractional_bits)) + sign * (z.raw << (f - z.fmt.fractional_bits))
    return FixedPointValue(policy.fit(round_shift(raw, f - out_fmt.fractional_bits, rounding), out_fmt), out_fmt)


def schoolbook_cmul(x: FixedComplex, w: GaussTwiddle, out_fmt: FixedPointFormat,
                    rounding: Rounding = Rounding.TRUNCATE, policy: OverflowPolicy | None = None) -> FixedComplex:
    """Four-multiplication reference: (AC - BD) + j(AD + BC), one rounding per output."""
    policy = _policy(policy)
    a, b, c, d = x.re, x.im, w.c, w.d
    ac, bd = fp_mul(a, c), fp_mul(b, d)
    ad, bc = fp_mul(a, d), fp_mul(b, c)
    f = ac.fmt.fractional_bits
    s = f - out_fmt.fractional_bits
    re_ = policy.fit(round_shift(ac.raw - bd.raw, s, rounding), out_fmt)
    im_ = policy.fit(round_shift(ad.raw + bc.raw, s, rounding), out_fmt)
    return FixedComplex(FixedPointValue(re_, out_fmt), FixedPointValue(im_, out_fmt))
