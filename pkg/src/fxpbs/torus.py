"""Discretized torus arithmetic, TLWE/TGLWE/TGGSW ciphertexts and gadget decomposition.

Torus values are uint32 residues x standing for x / 2^32. Every array
operation wraps modulo 2^32. Ciphertexts carry optional leading batch axes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import TfheParams

MASK32 = np.uint64(0xFFFFFFFF)
TWO32 = float(2**32)


def to_torus(x) -> np.ndarray:
    """Real numbers -> nearest torus grid point (ties up)."""
    v = np.floor(np.asarray(x, dtype=np.float64) * TWO32 + 0.5)
    return np.mod(v, TWO32).astype(np.uint64).astype(np.uint32)


def torus_to_float(t) -> np.ndarray:
    """Torus residues -> centered reals in [-1/2, 1/2)."""
    return np.asarray(t, dtype=np.uint32).view(np.int32).astype(np.float64) / TWO32


def signed(t) -> np.ndarray:
    return np.asarray(t, dtype=np.uint32).view(np.int32)


def gaussian_torus(rng: np.random.Generator, sigma: float, shape) -> np.ndarray:
    """Centered Gaussian noise rounded to the 2^-32 grid."""
    if sigma == 0:
        return np.zeros(shape, dtype=np.uint32)
    e = np.rint(rng.normal(0.0, sigma, size=shape) * TWO32).astype(np.int64)
    return (e & 0xFFFFFFFF).astype(np.uint32)


def uniform_torus(rng: np.random.Generator, shape) -> np.ndarray:
    return rng.integers(0, 2**32, size=shape, dtype=np.uint32)


# ---------------------------------------------------------------- polynomials

def poly_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Exact negacyclic product of torus polynomials a with integer polynomials b.

    Both have shape (..., N) and broadcast. Uses a twisted complex FFT on
    16-bit limbs of a, which is exact as long as |b| < 2^16.
    """
    a = np.asarray(a, dtype=np.uint32)
    b = np.asarray(b)
    N = a.shape[-1]
    if b.shape[-1] != N:
        raise ValueError("polynomial sizes differ")
    if np.abs(b.astype(np.int64)).max(initial=0) >= 2**16:
        raise ValueError("integer factor too large for exact FFT product")
    psi = np.exp(1j * np.pi * np.arange(N) / N)
    fb = np.fft.fft(b.astype(np.float64) * psi, axis=-1)
    out = np.zeros(np.broadcast_shapes(a.shape, b.shape), dtype=np.uint64)
    for shift in (0, 16):
        limb = ((a >> np.uint32(shift)) & np.uint32(0xFFFF)).astype(np.float64)
        prod = np.fft.ifft(np.fft.fft(limb * psi, axis=-1) * fb, axis=-1) * psi.conj()
        c = np.rint(prod.real).astype(np.int64)
        out += ((c << shift) & 0xFFFFFFFF).astype(np.uint64)
    return (out & MASK32).astype(np.uint32)


def poly_rotate(p: np.ndarray, r) -> np.ndarray:
    """Multiply torus polynomials p (..., N) by X^r, r in [0, 2N) broadcast over batch axes."""
    p = np.asarray(p, dtype=np.uint32)
    N = p.shape[-1]
    r = np.asarray(r, dtype=np.int64)[..., None]
    t = (np.arange(N) - r) % (2 * N)
    neg = t >= N
    src = np.where(neg, t - N, t)
    src = np.broadcast_to(src, np.broadcast_shapes(src.shape, p.shape))
    vals = np.take_along_axis(np.broadcast_to(p, src.shape), src, axis=-1)
    return np.where(np.broadcast_to(neg, src.shape), (0 - vals.astype(np.uint32)).astype(np.uint32), vals)


# ----------------------------------------------------------------- ciphertexts

@dataclass(frozen=True)
class SecretKeys:
    params: TfheParams
    tlwe_key: np.ndarray   # (n,) in {0,1}
    tglwe_key: np.ndarray  # (k, N) in {0,1}

    @property
    def extracted_key(self) -> np.ndarray:
        """Key for ciphertexts produced by sample_extract, (kN,)."""
        return self.tglwe_key.reshape(-1)


def keygen(params: TfheParams, seed: int = 0, *, zero_key: bool = False) -> SecretKeys:
    """Uniform binary keys from a seeded generator. zero_key is a test hook."""
    from .params import rng_stream

    rng = rng_stream(seed, "keygen")
    s = rng.integers(0, 2, size=params.n, dtype=np.int64)
    z = rng.integers(0, 2, size=(params.k, params.N), dtype=np.int64)
    if zero_key:
        s[:] = 0
        z[:] = 0
    return SecretKeys(params, s, z)


@dataclass(frozen=True)
class TlweCiphertext:
    """data[..., :dim] is a, data[..., dim] is b."""

    data: np.ndarray

    @property
    def a(self):
        return self.data[..., :-1]

    @property
    def b(self):
        return self.data[..., -1]

    @property
    def dim(self) -> int:
        return self.data.shape[-1] - 1

    @classmethod
    def from_parts(cls, a, b):
        a = np.asarray(a, dtype=np.uint32)
        b = np.asarray(b, dtype=np.uint32)
        return cls(np.concatenate([a, b[..., None]], axis=-1))

    @classmethod
    def trivial(cls, mu, dim: int):
        mu = np.asarray(mu, dtype=np.uint32)
        return cls.from_parts(np.zeros(mu.shape + (dim,), np.uint32), mu)

    def __add__(self, other):
        return TlweCiphertext(self.data + other.data)

    def __sub__(self, other):
        return TlweCiphertext(self.data - other.data)

    def __neg__(self):
        return TlweCiphertext((0 - self.data.astype(np.uint32)).astype(np.uint32))

    def __getitem__(self, idx):
        return TlweCiphertext(self.data[idx])

    def __len__(self):
        return self.data.shape[0]


@dataclass(frozen=True)
class TglweCiphertext:
    """data[..., :k, :] holds the mask polynomials, data[..., k, :] the body."""

    data: np.ndarray

    @property
    def a(self):
        return self.data[..., :-1, :]

    @property
    def b(self):
        return self.data[..., -1, :]

    @property
    def k(self) -> int:
        return self.data.shape[-2] - 1

    @property
    def N(self) -> int:
        return self.data.shape[-1]

    @classmethod
    def trivial(cls, mu, k: int):
        mu = np.asarray(mu, dtype=np.uint32)
        out = np.zeros(mu.shape[:-1] + (k + 1, mu.shape[-1]), np.uint32)
        out[..., k, :] = mu
        return cls(out)

    def __add__(self, other):
        return TglweCiphertext(self.data + other.data)

    def __sub__(self, other):
        return TglweCiphertext(self.data - other.data)

    def __getitem__(self, idx):
        return TglweCiphertext(self.data[idx])


@dataclass(frozen=True)
class TggswCiphertext:
    """data has shape (..., (k+1)l, k+1, N); row i*l + j is level j+1 of component i."""

    data: np.ndarray

    @property
    def rows(self) -> int:
        return self.data.shape[-3]

    def row(self, i: int) -> TglweCiphertext:
        return TglweCiphertext(self.data[..., i, :, :])


def _check_dim(ct_dim: int, key_dim: int):
    if ct_dim != key_dim:
        raise ValueError(f"ciphertext dimension {ct_dim} does not match key dimension {key_dim}")


def tlwe_encrypt(mu, key: np.ndarray, sigma: float, rng: np.random.Generator, *,
                 zero_mask: bool = False) -> TlweCiphertext:
    """Encrypt torus values mu (scalar or batch) under a binary key vector."""
    mu = np.asarray(mu, dtype=np.uint32)
    key = np.asarray(key)
    shape = mu.shape + (key.shape[-1],)
    a = np.zeros(shape, np.uint32) if zero_mask else uniform_torus(rng, shape)
    e = gaussian_torus(rng, sigma, mu.shape)
    dot = (a.astype(np.uint64) * key.astype(np.uint64)).sum(axis=-1, dtype=np.uint64) & MASK32
    b = (dot.astype(np.uint32) + e + mu).astype(np.uint32)
    return TlweCiphertext.from_parts(a, b)


def tlwe_decrypt(ct: TlweCiphertext, key: np.ndarray) -> np.ndarray:
    """Phase b - <a, s>, as torus residues."""
    key = np.asarray(key)
    _check_dim(ct.dim, key.shape[-1])
    dot = (ct.a.astype(np.uint64) * key.astype(np.uint64)).sum(axis=-1, dtype=np.uint64) & MASK32
    return (ct.b - dot.astype(np.uint32)).astype(np.uint32)


def tglwe_encrypt(mu, key: np.ndarray, sigma: float, rng: np.random.Generator, *,
                  zero_mask: bool = False) -> TglweCiphertext:
    """Encrypt torus polynomials mu (..., N) under key (k, N)."""
    mu = np.asarray(mu, dtype=np.uint32)
    key = np.asarray(key)
    k, N = key.shape
    _check_dim(mu.shape[-1], N)
    shape = mu.shape[:-1] + (k, N)
    a = np.zeros(shape, np.uint32) if zero_mask else uniform_torus(rng, shape)
    e = gaussian_torus(rng, sigma, mu.shape)
    body = (poly_mul(a, key).sum(axis=-2, dtype=np.uint64) & MASK32).astype(np.uint32)
    b = (body + e + mu).astype(np.uint32)
    return TglweCiphertext(np.concatenate([a, b[..., None, :]], axis=-2))


def tglwe_decrypt(ct: TglweCiphertext, key: np.ndarray) -> np.ndarray:
    key = np.asarray(key)
    if ct.k != key.shape[0]:
        raise ValueError(f"ciphertext has k={ct.k}, key has k={key.shape[0]}")
    _check_dim(ct.N, key.shape[1])
    body = (poly_mul(ct.a, key).sum(axis=-2, dtype=np.uint64) & MASK32).astype(np.uint32)
    return (ct.b - body).astype(np.uint32)


def tggsw_encrypt(m, keys: SecretKeys | np.ndarray, sigma: float, params: TfheParams,
                  rng: np.random.Generator) -> TggswCiphertext:
    """Encrypt small integers m (scalar or batch) in gadget form.

    Each row is a fresh TGLWE encryption of zero; row (i, j) additionally
    carries m * 2^(32 - (j+1)*beta) in component i at coefficient 0.
    """
    key = keys.tglwe_key if isinstance(keys, SecretKeys) else np.asarray(keys)
    m = np.asarray(m, dtype=np.int64)
    k, N, l, beta = params.k, params.N, params.l, params.beta
    zeros = np.zeros(m.shape + (params.rows, N), np.uint32)
    data = tglwe_encrypt(zeros, key, sigma, rng).data.copy()
    for i in range(k + 1):
        for j in range(l):
            g = np.uint64(1) << np.uint64(32 - (j + 1) * beta)
            add = ((m.astype(np.uint64) * g) & MASK32).astype(np.uint32)
            data[..., i * l + j, i, 0] += add
    return TggswCiphertext(data)


# ------------------------------------------------------------------ gadget

def gadget_decompose(p, beta: int, l: int) -> np.ndarray:
    """Signed approximate decomposition of torus values.

    Input shape (...), output (..., l) int32 digits in [-2^(beta-1), 2^(beta-1)),
    most significant level first. Level j (0-based) has weight 2^(32-(j+1)beta).
    The discarded low bits are rounded half up.
    """
    if l * beta > 32 or l < 1 or beta < 1:
        raise ValueError("need l >= 1, beta >= 1 and l * beta <= 32")
    x = np.asarray(p, dtype=np.uint32).astype(np.uint64)
    drop = 32 - l * beta
    if drop > 0:
        x = (x + (np.uint64(1) << np.uint64(drop - 1))) & MASK32
    x = x >> np.uint64(drop)
    base = 1 << beta
    half = base >> 1
    digits = np.empty(x.shape + (l,), dtype=np.int32)
    carry = np.zeros(x.shape, dtype=np.int64)
    for j in range(l - 1, -1, -1):
        d = (x & np.uint64(base - 1)).astype(np.int64) + carry
        x = x >> np.uint64(beta)
        carry = (d >= half).astype(np.int64)
        digits[..., j] = (d - carry * base).astype(np.int32)
    return digits


def gadget_recompose(digits, beta: int) -> np.ndarray:
    d = np.asarray(digits, dtype=np.int64)
    l = d.shape[-1]
    w = np.array([1 << (32 - (j + 1) * beta) for j in range(l)], dtype=np.int64)
    return ((d * w).sum(axis=-1) & 0xFFFFFFFF).astype(np.uint32)


def decompose_glwe(ct: TglweCiphertext, beta: int, l: int) -> np.ndarray:
    """Digits of every component, shape (..., (k+1)l, N) in TGGSW row order."""
    d = gadget_decompose(ct.data, beta, l)           # (..., k+1, N, l)
    d = np.moveaxis(d, -1, -2)                        # (..., k+1, l, N)
    return d.reshape(d.shape[:-3] + (-1, d.shape[-1]))


def sample_extract(acc: TglweCiphertext, index: int = 0) -> TlweCiphertext:
    """TLWE encryption of coefficient `index` of the accumulator's message."""
    a = acc.a
    N = acc.N
    j = np.arange(N)
    src = (index - j) % N
    sign_neg = j > index
    vals = a[..., src]
    vals = np.where(sign_neg, (0 - vals).astype(np.uint32), vals)
    flat = vals.reshape(vals.shape[:-2] + (-1,))
    return TlweCiphertext.from_parts(flat, acc.b[..., index])
