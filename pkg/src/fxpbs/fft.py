"""Negacyclic polynomial multiplication through a folded, twisted complex FFT.

A length-N polynomial p is folded into M = N/2 complex values
z[i] = p[i] + j p[i + M], twisted by psi^i with psi = exp(j pi / N), and
transformed by a radix-2 decimation-in-time FFT of size M. Pointwise products
of two such spectra correspond to the product modulo X^N + 1.

Two arithmetics share the stage structure:

* reference: complex128, exact scaling by powers of two;
* fixed: int64 raw values in one stored format per transform, Gauss
  three-multiplier twiddle products, optional halving per stage.

Fixed formats given to `FftPlan.fixed` are output referred: they describe
the transform output before any schedule compensation. The stored format
is that format shifted by the number of halving stages, so the stored
width stays constant through the transform.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _kernels as K
from .fixed_point import (
    OVERFLOW_CODE,
    ROUNDING_CODE,
    FixedPointFormat,
    FixedPointOverflow,
    Overflow,
    OverflowPolicy,
    Rounding,
)

TWO32 = float(2**32)


def default_schedule(stages: int) -> tuple[bool, ...]:
    """Halve after every other stage, starting with the first."""
    return tuple(s % 2 == 0 for s in range(stages))


def bit_reverse_permutation(M: int) -> np.ndarray:
    bits = M.bit_length() - 1
    idx = np.arange(M)
    rev = np.zeros(M, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


def fold(p) -> np.ndarray:
    """Real (..., N) -> complex (..., N/2): z[i] = p[i] + j p[i + N/2]."""
    p = np.asarray(p)
    N = p.shape[-1]
    if N % 2:
        raise ValueError("fold needs an even length")
    M = N // 2
    return p[..., :M] + 1j * p[..., M:]


def unfold(z) -> np.ndarray:
    z = np.asarray(z)
    return np.concatenate([z.real, z.imag], axis=-1)


def twist_factors(N: int, inverse: bool = False) -> np.ndarray:
    sign = -1.0 if inverse else 1.0
    return np.exp(sign * 1j * np.pi * np.arange(N // 2) / N)


def twist(v, N: int) -> np.ndarray:
    return np.asarray(v) * twist_factors(N)


def untwist(v, N: int) -> np.ndarray:
    return np.asarray(v) * twist_factors(N, inverse=True)


@dataclass
class FftDomainPoly:
    """Spectrum of one or more polynomials, shape (..., M).

    Reference spectra keep complex values in `re`/`im` float arrays with
    frac None. Fixed spectra hold raw integers with `frac` fraction bits.
    True values are (re + j im) * 2^-frac * 2^scale_exp.
    """

    re: np.ndarray
    im: np.ndarray
    frac: int | None = None
    scale_exp: int = 0
    width: int | None = None

    @property
    def is_fixed(self) -> bool:
        return self.frac is not None

    @property
    def scale(self) -> float:
        """Factor the schedule applied to the stored values."""
        return 2.0 ** -self.scale_exp

    def values(self) -> np.ndarray:
        """True (unscaled) complex spectrum as complex128."""
        f = 0 if self.frac is None else self.frac
        return (self.re.astype(np.float64) + 1j * self.im.astype(np.float64)) * 2.0 ** (self.scale_exp - f)

    @classmethod
    def from_complex(cls, z, scale_exp: int = 0):
        z = np.asarray(z, dtype=np.complex128)
        return cls(z.real.copy(), z.imag.copy(), None, scale_exp)

    def __getitem__(self, idx):
        return FftDomainPoly(self.re[idx], self.im[idx], self.frac, self.scale_exp, self.width)

    def to_csv(self) -> str:
        """index, re, im, scale for a single spectrum (true units)."""
        v = self.values().reshape(-1)
        lines = ["index,re,im,scale"]
        lines += [f"{i},{z.real!r},{z.imag!r},{self.scale!r}" for i, z in enumerate(v)]
        return "\n".join(lines) + "\n"


class TapRecorder:
    """Collects datapath values at named points, in true (unscaled) units.

    Every row of a recorded batch is one group; per-group count, sum, sum
    of squares and peak magnitude are kept so variances can be resampled by
    group.
    Raw values are retained only with keep_values.
    """

    def __init__(self, names=None, keep_values: bool = False):
        self.names = None if names is None else set(names)
        self.keep_values = keep_values
        self.groups: dict[str, list[np.ndarray]] = {}
        self.data: dict[str, list[np.ndarray]] = {}

    def wants(self, name: str) -> bool:
        return self.names is None or name in self.names

    def record(self, name: str, re, im, frac, scale_exp):
        """Values of one call; each leading-axis row becomes its own group."""
        if not self.wants(name):
            return
        f = 0 if frac is None else frac
        k = 2.0 ** (scale_exp - f)
        re = np.asarray(re, np.float64)
        rows = re.shape[0] if re.ndim > 1 else 1
        parts = [re.reshape(rows, -1)]
        im = np.asarray(im, np.float64)
        if im.size:
            parts.append(im.reshape(rows, -1))
        vals = np.concatenate(parts, axis=1) * k
        g = np.stack([np.full(rows, vals.shape[1], np.float64), vals.sum(axis=1),
                      np.einsum("ij,ij->i", vals, vals), np.abs(vals).max(axis=1, initial=0.0)], axis=1)
        self.groups.setdefault(name, []).append(g)
        if self.keep_values:
            self.data.setdefault(name, []).append(vals.ravel())

    def moments(self, name: str) -> np.ndarray:
        """(groups, 4) array of count, sum, sum of squares, peak."""
        if name not in self.groups:
            raise KeyError(f"no values recorded at tap {name!r}; recorded: {sorted(self.groups)}")
        return np.concatenate(self.groups[name])

    def values(self, name: str) -> np.ndarray:
        return np.concatenate(self.data.get(name, [np.zeros(0)]))


@dataclass(frozen=True)
class FftPlan:
    """Transform of size M = N/2 in one direction and arithmetic.

    For the fixed arithmetic `fmt` is the stored format and `twiddle_fmt`
    the format of twiddle and twist constants (default: width - 4 bits with
    one integer bit).
    """

    N: int
    inverse: bool = False
    arithmetic: str = "reference"
    fmt: FixedPointFormat | None = None
    twiddle_fmt: FixedPointFormat | None = None
    schedule: tuple[bool, ...] | None = None
    rounding: Rounding = Rounding.TRUNCATE
    overflow: Overflow = Overflow.WRAP
    twiddle_rounding: Rounding = Rounding.HALF_UP

    def __post_init__(self):
        M = self.N // 2
        if self.N < 4 or self.N & (self.N - 1):
            raise ValueError(f"N must be a power of two >= 4, got {self.N}")
        if self.schedule is None:
            object.__setattr__(self, "schedule", (False,) * self.stages)
        object.__setattr__(self, "schedule", tuple(bool(x) for x in self.schedule))
        if len(self.schedule) != self.stages:
            raise ValueError(f"schedule needs {self.stages} entries for size {M}")
        if self.arithmetic not in ("reference", "fixed"):
            raise ValueError(f"unknown arithmetic {self.arithmetic!r}")
        if self.arithmetic == "fixed":
            if self.fmt is None:
                raise ValueError("fixed plans need a stored format")
            if self.fmt.width > K.MAX_ARRAY_WIDTH:
                raise ValueError(f"array datapath supports widths up to {K.MAX_ARRAY_WIDTH}")
            if self.twiddle_fmt is None:
                object.__setattr__(self, "twiddle_fmt", FixedPointFormat(1, self.fmt.width - 5))
            if self.twiddle_fmt.width + 1 > K.MAX_ARRAY_WIDTH:
                raise ValueError("twiddle format too wide")
        object.__setattr__(self, "rounding", Rounding(self.rounding))
        object.__setattr__(self, "overflow", Overflow(self.overflow))

    @classmethod
    def fixed(cls, N: int, out_fmt: FixedPointFormat, inverse: bool = False, schedule=None,
              twiddle_fmt: FixedPointFormat | None = None, **kw) -> "FftPlan":
        """Plan whose output-referred format is out_fmt (default schedule: every other stage)."""
        stages = (N // 2).bit_length() - 1
        schedule = default_schedule(stages) if schedule is None else tuple(schedule)
        stored = out_fmt.shifted(sum(schedule))
        if twiddle_fmt is None:
            twiddle_fmt = FixedPointFormat(1, out_fmt.width - 5)
        return cls(N, inverse, "fixed", stored, twiddle_fmt, schedule, **kw)

    @property
    def size(self) -> int:
        return self.N // 2

    @property
    def stages(self) -> int:
        return self.size.bit_length() - 1

    @property
    def direction(self) -> str:
        return "inverse" if self.inverse else "forward"

    @property
    def scale_exp(self) -> int:
        return sum(self.schedule)

    @property
    def is_fixed(self) -> bool:
        return self.arithmetic == "fixed"

    @property
    def output_fmt(self) -> FixedPointFormat | None:
        return None if self.fmt is None else self.fmt.shifted(-self.scale_exp)

    # ---------------------------------------------------------- tables

    @cached_property
    def perm(self) -> np.ndarray:
        return bit_reverse_permutation(self.size)

    @cached_property
    def stage_twiddles(self) -> list[np.ndarray]:
        sign = -1.0 if self.inverse else 1.0
        return [np.exp(sign * 1j * np.pi * np.arange(1 << s) / (1 << s)) for s in range(self.stages)]

    @cached_property
    def twist_table(self) -> np.ndarray:
        return twist_factors(self.N, inverse=self.inverse)

    def _quantize_consts(self, w: np.ndarray, trivial: np.ndarray):
        f = self.twiddle_fmt.fractional_bits
        if self.twiddle_rounding is Rounding.TRUNCATE:
            q = np.floor
        elif self.twiddle_rounding is Rounding.HALF_UP:
            q = lambda x: np.floor(x + 0.5)  # noqa: E731
        else:
            q = np.rint
        c = q(w.real * 2.0**f).astype(np.int64)
        d = q(w.imag * 2.0**f).astype(np.int64)
        lim = 1 << (self.twiddle_fmt.width - 1)
        c = np.clip(c, -lim, lim - 1)
        d = np.clip(d, -lim, lim - 1)
        return (c - d, c + d, c, trivial.astype(np.int64))

    @cached_property
    def fixed_stage_twiddles(self):
        out = []
        for s, w in enumerate(self.stage_twiddles):
            h = 1 << s
            kind = np.zeros(h, dtype=np.int64)
            kind[0] = 1
            if h >= 2:
                kind[h // 2] = 3 if self.inverse else 2
            out.append(self._quantize_consts(w, kind))
        return out

    @cached_property
    def fixed_twist(self):
        kind = np.zeros(self.size, dtype=np.int64)
        kind[0] = 1
        return self._quantize_consts(self.twist_table, kind)

    @cached_property
    def wide(self) -> bool:
        """Whether products need the 128-bit kernels."""
        return self.fmt.width + self.twiddle_fmt.width + 3 > 62

    # ---------------------------------------------------------- helpers

    def _finish(self, count: int, policy: OverflowPolicy | None):
        if policy is not None:
            policy.count += int(count)
        if count and self.overflow is Overflow.TRAP:
            raise FixedPointOverflow(f"{count} overflow events in {self.direction} FFT")

    @property
    def _codes(self):
        return ROUNDING_CODE[self.rounding], OVERFLOW_CODE[self.overflow]


def _stages_reference(z: np.ndarray, plan: FftPlan, taps, prefix):
    re = np.ascontiguousarray(z.real[:, plan.perm])
    im = np.ascontiguousarray(z.imag[:, plan.perm])
    for s, w in enumerate(plan.stage_twiddles):
        K.fft_stage_ref(re, im, 1 << s, np.ascontiguousarray(w.real), np.ascontiguousarray(w.imag), plan.schedule[s])
        if taps is not None:
            taps.record(f"{prefix}.stage{s}", re, im, None, sum(plan.schedule[: s + 1]))
    return re + 1j * im


def _stages_fixed(re, im, plan: FftPlan, policy, taps, prefix):
    rm, om = plan._codes
    W = plan.fmt.width
    ft = plan.twiddle_fmt.fractional_bits
    re = np.ascontiguousarray(re[:, plan.perm])
    im = np.ascontiguousarray(im[:, plan.perm])
    count = 0
    for s, (cmd, cpd, c, kind) in enumerate(plan.fixed_stage_twiddles):
        count += K.fft_stage(re, im, 1 << s, cmd, cpd, c, kind, ft, plan.schedule[s], W, rm, om, plan.wide)
        if taps is not None:
            done = sum(plan.schedule[: s + 1])
            taps.record(f"{prefix}.stage{s}", re, im, plan.fmt.fractional_bits, done)
    plan._finish(count, policy)
    return re, im


def fft_forward(p, plan: FftPlan, *, integer: bool | None = None, policy: OverflowPolicy | None = None,
                taps: TapRecorder | None = None, prefix: str = "fft") -> FftDomainPoly:
    """Spectrum of polynomials p (..., N).

    uint32 input is read as centered torus values in [-1/2, 1/2); integer
    input (digits) is used as is. Pass `integer` to override the dtype rule.
    """
    if plan.inverse:
        raise ValueError("fft_forward needs a forward plan")
    p = np.asarray(p)
    N = plan.N
    if p.shape[-1] != N:
        raise ValueError(f"expected length {N}, got {p.shape[-1]}")
    if integer is None:
        integer = p.dtype != np.uint32
    lead = p.shape[:-1]
    p = p.reshape(-1, N)
    M = plan.size
    if not plan.is_fixed:
        x = p.astype(np.int64) if integer else p.view(np.int32).astype(np.float64) / TWO32
        z = fold(x.astype(np.float64))
        if taps is not None:
            taps.record(f"{prefix}.input", z.real, z.imag, None, 0)
        z = z * plan.twist_table
        z = _stages_reference(z, plan, taps, prefix)
        out = FftDomainPoly(z.real.reshape(lead + (M,)), z.imag.reshape(lead + (M,)), None, plan.scale_exp)
        return out

    rm, om = plan._codes
    f = plan.fmt.fractional_bits
    W = plan.fmt.width
    count = 0
    if integer:
        raw = p.astype(np.int64)
        shifted = np.empty_like(raw)
        count += K.round_shift_array(raw, -f, W, rm, om, shifted)
    else:
        raw = p.view(np.int32).astype(np.int64)
        shifted = np.empty_like(raw)
        count += K.round_shift_array(raw, 32 - f, W, rm, om, shifted)
    re = np.ascontiguousarray(shifted[:, :M])
    im = np.ascontiguousarray(shifted[:, M:])
    if taps is not None:
        taps.record(f"{prefix}.input", re, im, f, 0)
    cmd, cpd, c, kind = plan.fixed_twist
    count += K.cmul_const(re, im, cmd, cpd, c, kind, plan.twiddle_fmt.fractional_bits, W, rm, om, plan.wide)
    plan._finish(count, policy)
    re, im = _stages_fixed(re, im, plan, policy, taps, prefix)
    return FftDomainPoly(re.reshape(lead + (M,)), im.reshape(lead + (M,)), f, plan.scale_exp, W)


def fft_inverse(F: FftDomainPoly, plan: FftPlan, *, policy: OverflowPolicy | None = None,
                taps: TapRecorder | None = None, prefix: str = "ifft") -> np.ndarray:
    """Torus polynomials (..., N) from spectra, rounded half up onto the 2^-32 grid.

    Fixed spectra must already be in the plan's stored format.
    """
    if not plan.inverse:
        raise ValueError("fft_inverse needs an inverse plan")
    M = plan.size
    lead = F.re.shape[:-1]
    if not plan.is_fixed:
        z = (F.re + 1j * F.im).reshape(-1, M) * 2.0 ** F.scale_exp
        if F.frac is not None:
            z = z * 2.0 ** -F.frac
        if taps is not None:
            taps.record(f"{prefix}.input", z.real, z.imag, None, 0)
        z = _stages_reference(z, plan, taps, prefix)
        z = z * plan.twist_table * (2.0 ** plan.scale_exp / M)
        x = unfold(z)
        if taps is not None:
            taps.record(f"{prefix}.output", x, np.zeros(0), None, 0)
        out = np.empty(x.shape, dtype=np.uint32)
        K.torus_round(np.ascontiguousarray(x), out)
        return out.reshape(lead + (2 * M,))

    if F.frac != plan.fmt.fractional_bits or F.scale_exp != 0:
        raise ValueError("spectrum is not in the inverse plan's input format")
    rm, om = plan._codes
    W = plan.fmt.width
    re = np.ascontiguousarray(F.re.reshape(-1, M))
    im = np.ascontiguousarray(F.im.reshape(-1, M))
    if taps is not None:
        taps.record(f"{prefix}.input", re, im, F.frac, 0)
    re, im = _stages_fixed(re, im, plan, policy, taps, prefix)
    cmd, cpd, c, kind = plan.fixed_twist
    count = K.cmul_const(re, im, cmd, cpd, c, kind, plan.twiddle_fmt.fractional_bits, W, rm, om, plan.wide)
    plan._finish(count, policy)
    x = np.concatenate([re, im], axis=-1)
    if taps is not None:
        # time-domain torus values
        taps.record(f"{prefix}.output", x, np.zeros(0), plan.fmt.fractional_bits + (M.bit_length() - 1),
                    plan.scale_exp)
    # raw * 2^-f * 2^S / M on the torus: shift by 32 + S - f - log2(M), rounding half up
    e = 32 + plan.scale_exp - plan.fmt.fractional_bits - (M.bit_length() - 1)
    if e >= 0:
        t = x << e
    else:
        t = (x + (np.int64(1) << (-e - 1))) >> (-e)
    return (t & 0xFFFFFFFF).astype(np.uint32).reshape(lead + (2 * M,))


def spectrum_of_torus(p, N: int) -> np.ndarray:
    """Unscaled double-precision spectrum of torus polynomials, complex (..., N/2)."""
    p = np.asarray(p, dtype=np.uint32)
    z = fold(p.view(np.int32).astype(np.float64) / TWO32) * twist_factors(N)
    return np.fft.ifft(z, axis=-1) * (N // 2)


def quantize_spectrum(z: np.ndarray, fmt: FixedPointFormat, rounding: Rounding = Rounding.HALF_UP,
                      policy: OverflowPolicy | None = None):
    """Complex values -> Gauss triples (c - d, c + d, c) of raw ints at fmt, plus d."""
    f = fmt.fractional_bits
    if rounding is Rounding.TRUNCATE:
        q = np.floor
    elif rounding is Rounding.HALF_UP:
        q = lambda x: np.floor(x + 0.5)  # noqa: E731
    else:
        q = np.rint
    c = q(z.real * 2.0**f).astype(np.int64)
    d = q(z.imag * 2.0**f).astype(np.int64)
    lim = 1 << (fmt.width - 1)
    bad = int(((c < -lim) | (c >= lim)).sum() + ((d < -lim) | (d >= lim)).sum())
    if policy is not None:
        policy.count += bad
        if bad and policy.mode is Overflow.TRAP:
            raise FixedPointOverflow(f"{bad} spectrum values exceed {fmt}")
    if bad:
        if policy is not None and policy.mode is Overflow.SATURATE:
            c = np.clip(c, -lim, lim - 1)
            d = np.clip(d, -lim, lim - 1)
        else:
            c = ((c + lim) % (2 * lim)) - lim
            d = ((d + lim) % (2 * lim)) - lim
    return c - d, c + d, c, d


def _triples(x):
    return tuple(np.ascontiguousarray(v, dtype=np.int64) for v in x)


def mac_fixed(D: FftDomainPoly, bk_triples, out_plan: FftPlan, bk_frac: int,
              policy: OverflowPolicy | None = None) -> FftDomainPoly:
    """sum_t D[..., t, :] * BK[t, j, :] with one rounding into out_plan's stored format.

    D has shape (..., T, M); bk_triples are (c - d, c + d, c) each (T, J, M).
    """
    cmd, cpd, c = _triples(bk_triples)
    T, J, M = cmd.shape
    lead = D.re.shape[:-2]
    dre = np.ascontiguousarray(D.re.reshape(-1, T, M))
    dim = np.ascontiguousarray(D.im.reshape(-1, T, M))
    ore = np.empty((dre.shape[0], J, M), np.int64)
    oim = np.empty_like(ore)
    f_out = out_plan.fmt.fractional_bits
    s = D.frac + bk_frac - f_out - D.scale_exp
    rm, om = out_plan._codes
    W = out_plan.fmt.width
    bk_bits = max(int(np.abs(cmd).max(initial=1)), int(np.abs(cpd).max(initial=1))).bit_length() + 1
    wide = (D.width or 62) + 1 + bk_bits + T.bit_length() + 1 > 62
    n = K.mac(dre, dim, cmd, cpd, c, s, W, rm, om, wide, ore, oim)
    out_plan._finish(n, policy)
    return FftDomainPoly(ore.reshape(lead + (J, M)), oim.reshape(lead + (J, M)), f_out, 0, W)


def mac_reference(D: FftDomainPoly, bk: np.ndarray) -> FftDomainPoly:
    """Double-precision dot product; bk is complex (T, J, M)."""
    out = np.einsum("...tm,tjm->...jm", D.values(), bk)
    return FftDomainPoly.from_complex(out)


def pointwise_mac(acc: FftDomainPoly, a: FftDomainPoly, bk, bk_frac: int | None = None,
                  rounding: Rounding = Rounding.TRUNCATE, policy: OverflowPolicy | None = None) -> FftDomainPoly:
    """acc + a * bk elementwise.

    Reference: bk is complex. Fixed: bk is a (c - d, c + d, c) triple of raw
    ints with bk_frac fraction bits; the product is formed exactly, added to
    acc exactly and rounded once into acc's format.
    """
    if acc.frac is None:
        return FftDomainPoly.from_complex(acc.values() + a.values() * np.asarray(bk))
    cmd, cpd, c = _triples(bk)
    s = a.frac + bk_frac - acc.frac - a.scale_exp
    if not 0 <= s <= 60:
        raise ValueError(f"accumulator/product scale gap {s} not supported")
    shape = np.broadcast_shapes(acc.re.shape, a.re.shape, cmd.shape)
    E = int(np.prod(shape))

    def pair(x, y):
        return np.ascontiguousarray(np.stack([np.broadcast_to(x, shape).reshape(E),
                                              np.broadcast_to(y, shape).reshape(E)]))

    # the accumulator enters as a second product term against the exact constant 2^s
    one = np.int64(1) << s
    dre = pair(a.re, acc.re).reshape(1, 2, E)
    dim = pair(a.im, acc.im).reshape(1, 2, E)
    bcmd = pair(cmd, one).reshape(2, 1, E)
    bcpd = pair(cpd, one).reshape(2, 1, E)
    bc = pair(c, one).reshape(2, 1, E)
    ore = np.empty((1, 1, E), np.int64)
    oim = np.empty_like(ore)
    mode = policy.mode if policy is not None else Overflow.WRAP
    n = K.mac(dre, dim, bcmd, bcpd, bc, s, acc.width or 64, ROUNDING_CODE[Rounding(rounding)],
              OVERFLOW_CODE[mode], True, ore, oim)
    if policy is not None:
        policy.count += int(n)
        if n and mode is Overflow.TRAP:
            raise FixedPointOverflow(f"{n} overflow events in pointwise MAC")
    return FftDomainPoly(ore.reshape(shape), oim.reshape(shape), acc.frac, 0, acc.width)


def negacyclic_multiply(p, q, plan: FftPlan, inverse_plan: FftPlan | None = None,
                        operand_fmt: FixedPointFormat | None = None,
                        policy: OverflowPolicy | None = None) -> np.ndarray:
    """Torus polynomials p times small integer polynomials q modulo X^N + 1.

    On the reference path the result is exact after rounding whenever the
    double-precision error stays below half an ulp (small q). The fixed path
    mirrors the bootstrapping datapath: q goes through the fixed forward
    FFT, p's spectrum is computed in double and quantized at operand_fmt,
    and the product is rounded into the inverse plan's format.
    """
    p = np.asarray(p, dtype=np.uint32)
    q = np.asarray(q, dtype=np.int64)
    N = plan.N
    M = N // 2
    if not plan.is_fixed:
        inverse_plan = inverse_plan or FftPlan(N, inverse=True)
        z = fft_forward(p, plan).values() * fft_forward(q, plan, integer=True).values()
        return fft_inverse(FftDomainPoly.from_complex(z), inverse_plan)
    if inverse_plan is None:
        raise ValueError("fixed multiplication needs an inverse plan")
    if operand_fmt is None:
        operand_fmt = FixedPointFormat(8, plan.fmt.width - 8)
    lead = np.broadcast_shapes(p.shape[:-1], q.shape[:-1])
    Q = fft_forward(np.broadcast_to(q, lead + (N,)), plan, integer=True, policy=policy)
    cmd, cpd, c, _ = quantize_spectrum(spectrum_of_torus(np.broadcast_to(p, lead + (N,)), N), operand_fmt,
                                       policy=policy)
    E = int(np.prod(lead, dtype=np.int64)) * M
    D = FftDomainPoly(Q.re.reshape(1, 1, E), Q.im.reshape(1, 1, E), Q.frac, Q.scale_exp, Q.width)
    out = mac_fixed(D, (cmd.reshape(1, 1, E), cpd.reshape(1, 1, E), c.reshape(1, 1, E)),
                    inverse_plan, operand_fmt.fractional_bits, policy)
    S = FftDomainPoly(out.re.reshape(lead + (M,)), out.im.reshape(lead + (M,)), out.frac, 0, out.width)
    return fft_inverse(S, inverse_plan, policy=policy)
