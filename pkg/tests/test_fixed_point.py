from fractions import Fraction

import numpy as np
import pytest

import fxpbs.fixed_point as fp
from fxpbs import _kernels as K
from fxpbs.fixed_point import (
    FixedComplex,
    FixedPointFormat as F,
    FixedPointOverflow,
    FixedPointValue,
    Overflow,
    OverflowPolicy,
    Rounding,
    fp_add,
    fp_mul,
    fp_sub,
    gauss_cmul,
    make_twiddle,
    quantize,
    round_shift,
    schoolbook_cmul,
)


def test_format_basics():
    f = F.parse("26:7:19")
    assert (f.width, f.integer_bits, f.fractional_bits) == (26, 7, 19)
    assert F.parse("26(7,19)") == f
    assert str(f) == "26:7:19"
    assert f.min_raw == -(2**25) and f.max_raw == 2**25 - 1
    assert f.with_width(30) == F(7, 23)
    with pytest.raises(ValueError):
        F.parse("26:7:18")
    with pytest.raises(ValueError):
        F.parse("70:10:60")
    with pytest.raises(ValueError):
        F(1, 0)


@pytest.mark.parametrize("x, fmt, rounding, raw", [
    (0.0, F(4, 4), Rounding.TRUNCATE, 0),
    (0.5, F(4, 4), Rounding.TRUNCATE, 8),
    (Fraction(1, 3), F(2, 6), Rounding.HALF_UP, 21),
    (Fraction(1, 3), F(2, 6), Rounding.NEAREST_EVEN, 21),
    (Fraction(1, 3), F(2, 6), Rounding.TRUNCATE, 21),
    (-0.3, F(2, 6), Rounding.TRUNCATE, -20),
])
def test_quantize_examples(x, fmt, rounding, raw):
    assert quantize(x, fmt, rounding).raw == raw


def test_quantize_error_bounds(rng):
    fmt = F(3, 10)
    for x in rng.uniform(-3.9, 3.9, 500):
        t = quantize(x, fmt, Rounding.TRUNCATE)
        n = quantize(x, fmt, Rounding.HALF_UP)
        assert 0 <= x - t.value < 2**-10
        assert abs(n.value - x) <= 2**-11


def test_round_shift_ties():
    assert round_shift(5, 1, Rounding.TRUNCATE) == 2
    assert round_shift(5, 1, Rounding.HALF_UP) == 3
    assert round_shift(5, 1, Rounding.NEAREST_EVEN) == 2
    assert round_shift(7, 1, Rounding.NEAREST_EVEN) == 4
    assert round_shift(-5, 1, Rounding.HALF_UP) == -2
    assert round_shift(-5, 1, Rounding.TRUNCATE) == -3
    assert round_shift(3, -2) == 12


def test_overflow_modes():
    fmt = F(4, 4)
    mx = FixedPointValue(fmt.max_raw, fmt)
    wrap = OverflowPolicy(Overflow.WRAP)
    s = fp_add(mx, mx, wrap)
    assert s.raw == -2 and wrap.count == 1
    sat = OverflowPolicy(Overflow.SATURATE)
    assert fp_add(mx, mx, sat).raw == fmt.max_raw and sat.count == 1
    with pytest.raises(FixedPointOverflow):
        fp_add(mx, mx, OverflowPolicy(Overflow.TRAP))


def test_add_sub_exact(rng):
    fmt = F(8, 8)
    for a, b in rng.integers(-2**14, 2**14, (200, 2)):
        x, y = FixedPointValue(int(a), fmt), FixedPointValue(int(b), fmt)
        assert fp_add(x, y).raw == a + b
        assert fp_sub(x, y).raw == a - b
    z = FixedPointValue(0, fmt)
    assert fp_add(FixedPointValue(77, fmt), z).raw == 77
    with pytest.raises(ValueError):
        fp_add(z, FixedPointValue(0, F(7, 9)))


def test_fp_mul(rng):
    fmt = F(4, 12)
    h = quantize(0.5, fmt)
    assert fp_mul(h, h, fmt).value == 0.25
    assert fp_mul(h, quantize(0, fmt), fmt).raw == 0
    for a, b in rng.uniform(-2.5, 2.5, (300, 2)):
        x, y = quantize(a, fmt, Rounding.HALF_UP), quantize(b, fmt, Rounding.HALF_UP)
        exact = x.exact * y.exact
        r = fp_mul(x, y, fmt, Rounding.TRUNCATE)
        assert 0 <= exact - r.exact < Fraction(1, 2**12)
        assert fp_mul(x, y).exact == exact


def test_gauss_three_multiplies(monkeypatch):
    calls = []
    orig = fp.fp_mul

    def counting(*a, **kw):
        calls.append(1)
        return orig(*a, **kw)

    monkeypatch.setattr(fp, "fp_mul", counting)
    fmt = F(6, 10)
    x = FixedComplex(quantize(1, fmt), quantize(2, fmt))
    w = make_twiddle(3 + 4j, fmt)
    out = gauss_cmul(x, w, fmt)
    assert len(calls) == 3
    assert out.value == -5 + 10j


def test_gauss_identity_and_accuracy(rng):
    fmt = F(2, 20)
    tw = F(2, 24)
    one = make_twiddle(1 + 0j, tw)
    for _ in range(200):
        a, b = rng.uniform(-1, 1, 2)
        x = FixedComplex(quantize(a, fmt), quantize(b, fmt))
        assert gauss_cmul(x, one, fmt).value == x.value
        th = rng.uniform(0, 2 * np.pi)
        w = make_twiddle(complex(np.cos(th), np.sin(th)), tw)
        y = gauss_cmul(x, w, fmt).value
        exact = x.value * complex(np.cos(th), np.sin(th))
        assert abs(y.real - exact.real) <= 3 * 2**-20 and abs(y.imag - exact.imag) <= 3 * 2**-20


def test_gauss_matches_schoolbook_when_exact(rng):
    fmt = F(4, 12)
    tw = F(2, 14)
    out = F(2 * 4 + 3, 26)
    for _ in range(200):
        x = FixedComplex(*(FixedPointValue(int(v), fmt) for v in rng.integers(fmt.min_raw, fmt.max_raw, 2)))
        w = make_twiddle(complex(*rng.uniform(-1, 1, 2)), tw)
        assert gauss_cmul(x, w, out) == schoolbook_cmul(x, w, out)


@pytest.mark.parametrize("wide", [False, True])
@pytest.mark.parametrize("rounding", [0, 1, 2])
def test_kernel_matches_scalar(rng, wide, rounding):
    """The array Gauss multiplier reproduces the scalar definition bit for bit."""
    width = 50 if wide else 24
    tw = F(1, width - 5)
    out_fmt = F(width - 20, 20)
    in_fmt = out_fmt
    n = 300
    re = rng.integers(in_fmt.min_raw, in_fmt.max_raw, n)
    im = rng.integers(in_fmt.min_raw, in_fmt.max_raw, n)
    ws = [make_twiddle(complex(*rng.uniform(-1, 1, 2)), tw) for _ in range(n)]
    cmd = np.array([w.c_minus_d.raw for w in ws])
    cpd = np.array([w.c_plus_d.raw for w in ws])
    c = np.array([w.c.raw for w in ws])
    r2, i2 = re.reshape(1, n).copy(), im.reshape(1, n).copy()
    kind = np.zeros(n, np.int64)
    cnt = K.cmul_const(r2, i2, cmd, cpd, c, kind, tw.fractional_bits, width, rounding, 0, wide)
    r2, i2 = r2[0], i2[0]
    mode = [Rounding.TRUNCATE, Rounding.HALF_UP, Rounding.NEAREST_EVEN][rounding]
    pol = OverflowPolicy()
    for t in range(n):
        x = FixedComplex(FixedPointValue(int(re[t]), in_fmt), FixedPointValue(int(im[t]), in_fmt))
        y = gauss_cmul(x, ws[t], out_fmt, mode, pol)
        assert (y.re.raw, y.im.raw) == (r2[t], i2[t])
    assert cnt == pol.count
