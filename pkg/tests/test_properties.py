"""Randomized invariants, each checked over at least 1000 generated cases."""

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from fxpbs.datapath import DatapathConfig, DatapathFormats
from fxpbs.fixed_point import FixedPointFormat as F
from fxpbs.fixed_point import FixedPointValue, Rounding, fp_add, quantize
from fxpbs.pbs import BootstrappingKey, Engine, monomial_mul
from fxpbs.params import rng_stream
from fxpbs.torus import (
    TglweCiphertext,
    TlweCiphertext,
    gadget_decompose,
    gadget_recompose,
    keygen,
    poly_rotate,
    sample_extract,
    signed,
    tggsw_encrypt,
    tglwe_decrypt,
    tlwe_decrypt,
    uniform_torus,
)

from conftest import NOISELESS, TINY

MANY = settings(max_examples=1000, deadline=None, suppress_health_check=[HealthCheck.too_slow])

u32 = st.integers(0, 2**32 - 1)
seeds = st.integers(0, 2**32 - 1)


@st.composite
def gadget_params(draw):
    beta = draw(st.integers(1, 16))
    l = draw(st.integers(1, 32 // beta))
    return beta, l


@MANY
@given(st.lists(u32, min_size=1, max_size=16), gadget_params())
def test_decomposition_bound_and_digit_range(xs, bl):
    beta, l = bl
    x = np.array(xs, dtype=np.uint32)
    d = gadget_decompose(x, beta, l)
    assert d.min() >= -(1 << (beta - 1)) and d.max() < (1 << (beta - 1))
    err = np.abs(signed(gadget_recompose(d, beta) - x).astype(np.int64))
    drop = 32 - l * beta
    assert err.max() <= (1 << (drop - 1) if drop else 0)


@MANY
@given(st.integers(0, 2**32 - 1), st.integers(1, 8), st.sampled_from([0, 1, 2]))
def test_decomposition_near_rounding_boundaries(k, beta, off):
    l = 2
    step = 1 << (32 - l * beta)
    x = np.array([(k * step + step // 2 - 1 + off) & 0xFFFFFFFF], dtype=np.uint32)
    err = np.abs(signed(gadget_recompose(gadget_decompose(x, beta, l), beta) - x).astype(np.int64))
    assert err[0] <= step // 2


# noiseless planted keys for the multiplexer
_KEYS = keygen(NOISELESS, 11)
_ENG = Engine(NOISELESS)
_SEL = [_ENG.prepare(BootstrappingKey.from_tggsw(
    tggsw_encrypt(m, _KEYS, 0.0, NOISELESS, rng_stream(m, "sel")), NOISELESS).spectrum[0]) for m in (0, 1)]
_BOUND = 2 ** (32 - NOISELESS.l * NOISELESS.beta - 1) * (1 + NOISELESS.k * NOISELESS.N)


@MANY
@given(seeds, st.integers(0, 2 * TINY.N - 1), st.sampled_from([0, 1]))
def test_cmux_selects_branch(seed, r, bit):
    rng = np.random.default_rng(seed)
    acc = TglweCiphertext(uniform_torus(rng, (TINY.k + 1, TINY.N)))
    out = _ENG.cmux(acc, _SEL[bit], r)
    ph_in = tglwe_decrypt(acc, _KEYS.tglwe_key)
    want = poly_rotate(ph_in, r) if bit else ph_in
    got = tglwe_decrypt(out, _KEYS.tglwe_key)
    assert np.abs(signed(got - want).astype(np.int64)).max() <= _BOUND


@MANY
@given(seeds, st.integers(0, 2 * TINY.N - 1))
def test_monomial_inverse_pair(seed, r):
    rng = np.random.default_rng(seed)
    acc = TglweCiphertext(uniform_torus(rng, (2, TINY.k + 1, TINY.N)))
    back = monomial_mul(monomial_mul(acc, r), (2 * TINY.N - r) % (2 * TINY.N))
    assert np.array_equal(back.data, acc.data)


_BKEYS = keygen(TINY, 3)
_BK = BootstrappingKey.generate(_BKEYS, 3)
_FIXED = Engine(TINY, DatapathConfig.fixed(DatapathFormats(F(7, 19), F(15, 14), F(23, 6))))


@MANY
@given(seeds, st.integers(1, 4))
def test_batch_equals_sequential(seed, b):
    rng = np.random.default_rng(seed)
    ct = TlweCiphertext(uniform_torus(rng, (b, TINY.n + 1)))
    luts = uniform_torus(rng, (b, TINY.N))
    batched, _ = _FIXED.bootstrap(ct, luts, _BK, batch_size=b)
    for i in range(b):
        single, _ = _FIXED.bootstrap(ct[i:i + 1], luts[i:i + 1], _BK, batch_size=1)
        assert np.array_equal(single.data[0], batched.data[i])


@st.composite
def value_and_format(draw):
    i = draw(st.integers(1, 32))
    f = draw(st.integers(-8, 64 - i))
    fmt = F(i, f) if i + f >= 2 else F(i, 2 - i)
    raw = draw(st.integers(fmt.min_raw, fmt.max_raw))
    return FixedPointValue(raw, fmt)


@MANY
@given(value_and_format(), st.sampled_from(list(Rounding)))
def test_quantize_idempotent(v, rounding):
    assert quantize(v.exact, v.fmt, rounding) == v
    if v.fmt.width <= 53:
        assert quantize(v.value, v.fmt, rounding) == v


@MANY
@given(value_and_format(), st.data())
def test_add_exact_in_range(a, data):
    b = FixedPointValue(data.draw(st.integers(a.fmt.min_raw, a.fmt.max_raw)), a.fmt)
    s = a.raw + b.raw
    if a.fmt.min_raw <= s <= a.fmt.max_raw:
        assert fp_add(a, b).raw == s


@MANY
@given(seeds)
def test_sample_extract_consistency(seed):
    rng = np.random.default_rng(seed)
    acc = TglweCiphertext(uniform_torus(rng, (TINY.k + 1, TINY.N)))
    ext = sample_extract(acc)
    assert tlwe_decrypt(ext, _BKEYS.extracted_key) == tglwe_decrypt(acc, _BKEYS.tglwe_key)[0]
