"""Programmable bootstrapping: test polynomials, CMUX and batched blind rotation.

All ciphertexts of a batch advance through blind-rotation iteration i
together, so bootstrapping-key entry i is fetched once per batch.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .datapath import DatapathConfig
from .fft import (
    FftDomainPoly,
    TapRecorder,
    fft_forward,
    fft_inverse,
    mac_fixed,
    mac_reference,
    quantize_spectrum,
    spectrum_of_torus,
)
from .fixed_point import FixedPointFormat, Overflow, OverflowPolicy, Rounding
from .params import TfheParams, rng_stream
from .torus import (
    SecretKeys,
    TggswCiphertext,
    TglweCiphertext,
    TlweCiphertext,
    decompose_glwe,
    poly_rotate,
    sample_extract,
    tggsw_encrypt,
    to_torus,
)


# ----------------------------------------------------------------- LUTs

@dataclass(frozen=True)
class TestPolynomial:
    """Body polynomial F of the trivial accumulator (a = 0, b = F)."""

    poly: np.ndarray  # (N,) uint32

    def accumulator(self, k: int) -> TglweCiphertext:
        return TglweCiphertext.trivial(self.poly, k)


def build_lut(f: Callable[[int], float], params: TfheParams, message_bits: int,
              half_offset: bool = True) -> TestPolynomial:
    """Test polynomial for messages m in [0, 2^p) encoded as m / 2^(p+1).

    The top bit of the torus is padding, so each message owns N / 2^p
    consecutive coefficients. With half_offset the polynomial is pre-rotated
    by half a bucket so that noise on either side of an encoding lands in
    its own bucket. f returns a torus value as a real number.
    """
    N = params.N
    p = message_bits
    if p < 0 or (1 << p) > N:
        raise ValueError(f"message_bits={p} too large for N={N}")
    width = N >> p
    vals = np.array([f(j // width) for j in range(N)], dtype=np.float64)
    F = to_torus(vals)
    if half_offset:
        F = poly_rotate(F, (2 * N - width // 2) % (2 * N))
    return TestPolynomial(F)


def constant_lut(value: float, params: TfheParams) -> TestPolynomial:
    return TestPolynomial(np.full(params.N, to_torus(value), dtype=np.uint32))


def encode_message(m, message_bits: int) -> np.ndarray:
    return to_torus(np.asarray(m, dtype=np.float64) / 2 ** (message_bits + 1))


def decode_message(t, message_bits: int) -> np.ndarray:
    """Nearest message index, with the padding bit discarded."""
    t = np.asarray(t, dtype=np.uint32).astype(np.uint64)
    step = 32 - message_bits - 1
    return (((t + (np.uint64(1) << np.uint64(step - 1))) >> np.uint64(step)) % (1 << (message_bits + 1))).astype(np.int64)


# --------------------------------------------------------- rotation helpers

def rotation_amount(a, N: int) -> np.ndarray:
    """round(2N a / 2^32) mod 2N computed from the top log2(2N)+1 bits of a."""
    bits = (2 * N).bit_length() - 1
    a = np.asarray(a, dtype=np.uint32).astype(np.int64)
    return (((a >> (32 - bits - 1)) + 1) >> 1) % (2 * N)


def monomial_mul(c: TglweCiphertext, r) -> TglweCiphertext:
    """Every polynomial times X^r; r broadcasts over batch axes."""
    r = np.asarray(r, dtype=np.int64)
    if np.any((r < 0) | (r >= 2 * c.N)):
        raise ValueError("rotation must lie in [0, 2N)")
    return TglweCiphertext(poly_rotate(c.data, r[..., None]))


# ------------------------------------------------------------ the key

@dataclass
class BootstrappingKey:
    """TGGSW encryptions of the TLWE key bits, kept in the frequency domain.

    `spectrum` is the unscaled double-precision spectrum, shape
    (n, (k+1)l, k+1, N/2). Quantized copies for fixed datapaths are built on
    demand and cached per (format, rounding). `reads[i]` counts fetches of
    entry i.
    """

    params: TfheParams
    spectrum: np.ndarray
    fmt: FixedPointFormat | None = None
    reads: np.ndarray = field(default=None)
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.reads is None:
            self.reads = np.zeros(self.spectrum.shape[0], dtype=np.int64)

    @classmethod
    def generate(cls, keys: SecretKeys, seed: int = 0, sigma: float | None = None) -> "BootstrappingKey":
        params = keys.params
        sigma = params.sigma_tglwe if sigma is None else sigma
        rng = rng_stream(seed, "bootstrapping-key")
        ggsw = tggsw_encrypt(keys.tlwe_key, keys, sigma, params, rng)
        return cls.from_tggsw(ggsw, params)

    @classmethod
    def from_tggsw(cls, ggsw: TggswCiphertext, params: TfheParams) -> "BootstrappingKey":
        data = ggsw.data
        if data.ndim == 3:
            data = data[None]
        return cls(params, spectrum_of_torus(data, params.N))

    @property
    def n(self) -> int:
        return self.spectrum.shape[0]

    def entry_bytes(self, width: int) -> int:
        """Storage per entry: (k+1)l * (k+1) * N/2 complex words of `width` bits."""
        T, J, M = self.spectrum.shape[1:]
        return T * J * M * 2 * width // 8

    def prepared(self, config: DatapathConfig, policy: OverflowPolicy | None = None):
        """Per-entry operands for a datapath: complex array or Gauss triples."""
        if config.arithmetic == "reference":
            return self.spectrum
        fmt = config.formats.bk
        key = (fmt, config.bk_rounding)
        if key not in self._cache:
            local = OverflowPolicy(Overflow.WRAP)
            cmd, cpd, c, _ = quantize_spectrum(self.spectrum, fmt, config.bk_rounding, local)
            self._cache[key] = ((cmd, cpd, c), local.count)
        triples, nover = self._cache[key]
        if policy is not None:
            policy.count += nover
        return triples

    def quantized(self, fmt: FixedPointFormat, rounding: Rounding = Rounding.HALF_UP) -> "BootstrappingKey":
        """Copy whose spectrum is exactly representable at fmt."""
        _, _, c, d = quantize_spectrum(self.spectrum, fmt, rounding)
        z = (c + 1j * d) * 2.0 ** -fmt.fractional_bits
        return BootstrappingKey(self.params, z, fmt)

    # --------------------------------------------------- serialization

    def to_bytes(self, fmt: FixedPointFormat | None = None) -> bytes:
        """Entry-indexed raw fixed-point words, re/im interleaved."""
        fmt = fmt or self.fmt
        if fmt is None:
            raise ValueError("a fixed-point format is needed to serialize the key")
        _, _, c, d = quantize_spectrum(self.spectrum, fmt)
        dtype = "<i4" if fmt.width <= 32 else "<i8"
        words = np.stack([c, d], axis=-1).astype(dtype)
        head = struct.pack("<6i", *self.spectrum.shape, fmt.integer_bits, fmt.fractional_bits)
        return head + words.tobytes()

    @classmethod
    def from_bytes(cls, buf: bytes, params: TfheParams) -> "BootstrappingKey":
        n, T, J, M, ib, fb = struct.unpack_from("<6i", buf)
        fmt = FixedPointFormat(ib, fb)
        dtype = "<i4" if fmt.width <= 32 else "<i8"
        words = np.frombuffer(buf, dtype=dtype, offset=24).reshape(n, T, J, M, 2).astype(np.int64)
        z = (words[..., 0] + 1j * words[..., 1]) * 2.0 ** -fb
        return cls(params, z, fmt)


# ------------------------------------------------------------ execution

@dataclass
class PbsReport:
    overflow_count: int = 0
    bk_reads: int = 0
    batches: int = 0


class Engine:
    """Runs external products on one datapath for one parameter set."""

    def __init__(self, params: TfheParams, config: DatapathConfig | None = None,
                 taps: TapRecorder | None = None):
        self.params = params
        self.config = config or DatapathConfig()
        self.fwd, self.inv = self.config.plans(params.N)
        self.policy = OverflowPolicy(self.config.overflow)
        self.taps = taps

    @property
    def is_fixed(self) -> bool:
        return self.config.arithmetic == "fixed"

    def prepare(self, spectrum: np.ndarray):
        """Operands for an arbitrary (T, k+1, N/2) spectrum."""
        if not self.is_fixed:
            return spectrum
        cmd, cpd, c, _ = quantize_spectrum(spectrum, self.config.formats.bk, self.config.bk_rounding, self.policy)
        return cmd, cpd, c

    def external_product(self, c: TglweCiphertext, entry) -> TglweCiphertext:
        """c (..., k+1, N) times the TGGSW whose prepared spectrum is `entry`."""
        p = self.params
        digits = decompose_glwe(c, p.beta, p.l)            # (..., T, N)
        D = fft_forward(digits, self.fwd, integer=True, policy=self.policy, taps=self.taps)
        if self.is_fixed:
            S = mac_fixed(D, entry, self.inv, self.config.formats.bk.fractional_bits, self.policy)
        else:
            S = mac_reference(D, entry)
        if self.taps is not None:
            self.taps.record("mac.out", S.re, S.im, S.frac, 0)
        out = fft_inverse(S, self.inv, policy=self.policy, taps=self.taps)
        return TglweCiphertext(out)

    def cmux(self, acc: TglweCiphertext, entry, r) -> TglweCiphertext:
        """ACC + (ACC X^r - ACC) [x] BK_i."""
        rot = monomial_mul(acc, r)
        prod = self.external_product(rot - acc, entry)
        return acc + prod

    def _native(self, acc: TglweCiphertext) -> TglweCiphertext:
        drop = 32 - self.params.l * self.params.beta
        if drop <= 0:
            return acc
        x = acc.data.astype(np.uint64) + np.uint64(1 << (drop - 1))
        x = (x >> np.uint64(drop)) << np.uint64(drop)
        return TglweCiphertext((x & np.uint64(0xFFFFFFFF)).astype(np.uint32))

    def blind_rotate(self, ct: TlweCiphertext, luts: np.ndarray, bk: BootstrappingKey) -> TglweCiphertext:
        """Batched blind rotation; luts is (N,) or (..., N) matching ct's batch."""
        p = self.params
        if ct.dim != bk.n:
            raise ValueError(f"ciphertext dimension {ct.dim} != key length {bk.n}")
        N = p.N
        rb = rotation_amount(ct.b, N)
        ra = rotation_amount(ct.a, N)
        luts = np.broadcast_to(np.asarray(luts, dtype=np.uint32), ct.b.shape + (N,))
        acc = monomial_mul(TglweCiphertext.trivial(luts, p.k), (2 * N - rb) % (2 * N))
        entries = bk.prepared(self.config, self.policy)
        for i in range(bk.n):
            bk.reads[i] += 1
            entry = entries[i] if not self.is_fixed else tuple(x[i] for x in entries)
            acc = self.cmux(acc, entry, ra[..., i])
            if self.config.native_lbeta:
                acc = self._native(acc)
        return acc

    def bootstrap(self, ct: TlweCiphertext, luts, bk: BootstrappingKey, batch_size: int | None = None):
        """PBS of ct (B, n+1); luts is one test polynomial or a (B, N) stack.

        Returns extracted TLWE ciphertexts (B, kN+1) and a report.
        """
        report = PbsReport()
        start = self.policy.count
        reads0 = int(bk.reads.sum())
        if isinstance(luts, TestPolynomial):
            luts = luts.poly
        luts = np.asarray(luts, dtype=np.uint32)
        data = ct.data.reshape(-1, ct.data.shape[-1])
        B = data.shape[0]
        step = B if batch_size is None else batch_size
        outs = []
        for s in range(0, B, step):
            chunk = TlweCiphertext(data[s:s + step])
            lut = luts if luts.ndim == 1 else luts.reshape(-1, self.params.N)[s:s + step]
            acc = self.blind_rotate(chunk, lut, bk)
            outs.append(sample_extract(acc).data)
            report.batches += 1
        report.overflow_count = self.policy.count - start
        report.bk_reads = int(bk.reads.sum()) - reads0
        out = np.concatenate(outs).reshape(ct.data.shape[:-1] + (self.params.extracted_dim + 1,))
        return TlweCiphertext(out), report


# -------------------------------------------------------- module-level API

def external_product(c: TglweCiphertext, ggsw: TggswCiphertext, params: TfheParams,
                     config: DatapathConfig | None = None) -> TglweCiphertext:
    eng = Engine(params, config)
    return eng.external_product(c, eng.prepare(spectrum_of_torus(ggsw.data, params.N)))


def cmux(acc: TglweCiphertext, ggsw: TggswCiphertext, a_i, params: TfheParams,
         config: DatapathConfig | None = None) -> TglweCiphertext:
    eng = Engine(params, config)
    entry = eng.prepare(spectrum_of_torus(ggsw.data, params.N))
    return eng.cmux(acc, entry, rotation_amount(a_i, params.N))


def blind_rotate(ct: TlweCiphertext, lut: TestPolynomial, bk: BootstrappingKey,
                 config: DatapathConfig | None = None) -> TglweCiphertext:
    return Engine(bk.params, config).blind_rotate(ct, lut.poly, bk)


def bootstrap(ct: TlweCiphertext, bk: BootstrappingKey, luts, config: DatapathConfig | None = None,
              lut_index: Sequence[int] | None = None, batch_size: int | None = None):
    """PBS of a batch. luts: a TestPolynomial, or a list of them with per-ciphertext lut_index."""
    if isinstance(luts, TestPolynomial):
        table = luts.poly
    else:
        stack = np.stack([t.poly for t in luts])
        idx = np.zeros(ct.data.shape[:-1], dtype=np.int64) if lut_index is None else np.asarray(lut_index)
        table = stack[idx]
    return Engine(bk.params, config).bootstrap(ct, table, bk, batch_size)


# ---------------------------------------------------------------- gates

EIGHTH = np.uint32(1 << 29)


def encode_bit(bit) -> np.ndarray:
    """True -> +1/8, False -> -1/8."""
    bit = np.asarray(bit, dtype=bool)
    return np.where(bit, EIGHTH, np.uint32(2**32 - (1 << 29))).astype(np.uint32)


def decode_bit(t) -> np.ndarray:
    """Positive half of the torus -> True."""
    return np.asarray(t, dtype=np.uint32).view(np.int32) > 0


def gate_lut(params: TfheParams) -> TestPolynomial:
    return constant_lut(1 / 8, params)


def gate_nand(c1: TlweCiphertext, c2: TlweCiphertext, bk: BootstrappingKey,
              config: DatapathConfig | None = None, engine: Engine | None = None):
    """Bootstrapped NAND of ±1/8-encoded bits; returns (ciphertext, report)."""
    lin = TlweCiphertext.trivial(np.full(c1.b.shape, EIGHTH, np.uint32), c1.dim) - c1 - c2
    eng = engine or Engine(bk.params, config)
    return eng.bootstrap(lin, gate_lut(bk.params), bk)
