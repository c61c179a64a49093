import numpy as np
import pytest

from fxpbs import serialize
from fxpbs.params import SET_I, SET_II, TfheParams, get_params, rng_stream
from fxpbs.torus import (
    TglweCiphertext,
    TlweCiphertext,
    gadget_decompose,
    gadget_recompose,
    keygen,
    poly_mul,
    poly_rotate,
    sample_extract,
    signed,
    tggsw_encrypt,
    tglwe_decrypt,
    tglwe_encrypt,
    tlwe_decrypt,
    tlwe_encrypt,
    to_torus,
    torus_to_float,
    uniform_torus,
)


def schoolbook(a, b):
    N = len(a)
    out = [0] * N
    for i in range(N):
        for j in range(N):
            t = int(a[i]) * int(b[j])
            if i + j < N:
                out[i + j] += t
            else:
                out[i + j - N] -= t
    return np.array([x % 2**32 for x in out], dtype=np.uint32)


def test_params_validation():
    with pytest.raises(ValueError):
        TfheParams(n=10, k=1, N=100, beta=8, l=2, sigma_tlwe=0, sigma_tglwe=0)
    with pytest.raises(ValueError):
        TfheParams(n=10, k=1, N=64, beta=12, l=3, sigma_tlwe=0, sigma_tglwe=0)
    with pytest.raises(ValueError):
        get_params("III")
    assert get_params("i") is SET_I
    assert SET_I.digest() != SET_II.digest()


def test_rng_streams_are_independent_and_repeatable():
    a = rng_stream(3, "x").integers(0, 2**32, 8)
    assert np.array_equal(a, rng_stream(3, "x").integers(0, 2**32, 8))
    assert not np.array_equal(a, rng_stream(3, "y").integers(0, 2**32, 8))


def test_torus_conversions():
    assert to_torus(0.25) == 2**30
    assert to_torus(-0.25) == 3 * 2**30
    assert to_torus(1.0) == 0
    assert torus_to_float(np.uint32(2**30)) == 0.25
    assert torus_to_float(np.uint32(2**31)) == -0.5  # centered representative
    assert signed(np.uint32(2**32 - 1)) == -1


def test_keygen_shapes_and_determinism():
    k1 = keygen(SET_I, 0)
    k2 = keygen(SET_I, 0)
    assert k1.tlwe_key.shape == (586,)
    assert k1.extracted_key.shape == (1024,)
    assert set(np.unique(k1.tlwe_key)) <= {0, 1}
    assert np.array_equal(k1.tlwe_key, k2.tlwe_key) and np.array_equal(k1.tglwe_key, k2.tglwe_key)
    assert not np.array_equal(k1.tlwe_key, keygen(SET_I, 1).tlwe_key)


def test_zero_key_decrypts_to_body(rng):
    keys = keygen(SET_I, 0, zero_key=True)
    ct = tlwe_encrypt(np.uint32(12345), keys.tlwe_key, 2.0**-20, rng)
    assert tlwe_decrypt(ct, keys.tlwe_key) == ct.b


def test_tlwe_noiseless_and_zero_mask(rng):
    keys = keygen(SET_I, 0)
    mu = uniform_torus(rng, 50)
    ct = tlwe_encrypt(mu, keys.tlwe_key, 0.0, rng)
    assert np.array_equal(tlwe_decrypt(ct, keys.tlwe_key), mu)
    ct0 = tlwe_encrypt(mu, keys.tlwe_key, 2.0**-20, rng, zero_mask=True)
    assert np.all(ct0.a == 0)
    assert np.all(np.abs(signed(ct0.b - mu)) < 2**14)


def test_tlwe_noise_std(rng):
    keys = keygen(SET_I, 0)
    sigma = 2.0**-25
    ct = tlwe_encrypt(np.zeros(10_000, np.uint32), keys.tlwe_key, sigma, rng)
    e = signed(tlwe_decrypt(ct, keys.tlwe_key)) / 2.0**32
    assert abs(e.std() / sigma - 1) < 0.1


def test_dimension_mismatch(rng):
    keys = keygen(SET_I, 0)
    ct = tlwe_encrypt(np.uint32(0), keys.tlwe_key, 0.0, rng)
    with pytest.raises(ValueError):
        tlwe_decrypt(ct, keys.extracted_key)


def test_poly_mul_matches_schoolbook(rng):
    for N in (8, 64):
        a = uniform_torus(rng, N)
        b = rng.integers(-200, 200, N)
        assert np.array_equal(poly_mul(a, b), schoolbook(a, b))


def test_poly_rotate_negacyclic():
    p = np.arange(1, 9, dtype=np.uint32)
    r = poly_rotate(p, 1)
    assert r[0] == np.uint32(-8 & 0xFFFFFFFF) and np.array_equal(r[1:], p[:-1])
    assert np.array_equal(poly_rotate(p, 8), (0 - p).astype(np.uint32))
    assert np.array_equal(poly_rotate(poly_rotate(p, 5), 11), p)


def test_tglwe_roundtrip_and_constant(rng):
    keys = keygen(SET_II, 0)
    mu = np.zeros(SET_II.N, np.uint32)
    mu[0] = to_torus(0.3)
    ct = tglwe_encrypt(mu, keys.tglwe_key, 0.0, rng)
    assert np.array_equal(tglwe_decrypt(ct, keys.tglwe_key), mu)
    triv = TglweCiphertext.trivial(mu, SET_II.k)
    assert np.array_equal(tglwe_decrypt(triv, keygen(SET_II, 5).tglwe_key), mu)


def test_tglwe_error_variance(rng):
    keys = keygen(SET_I, 0)
    sigma = 2.0**-22
    ct = tglwe_encrypt(np.zeros((20, SET_I.N), np.uint32), keys.tglwe_key, sigma, rng)
    e = signed(tglwe_decrypt(ct, keys.tglwe_key)) / 2.0**32
    assert abs(e.var() / sigma**2 - 1) < 0.1


def test_homomorphic_addition(rng):
    keys = keygen(SET_I, 0)
    m1, m2 = uniform_torus(rng, 100), uniform_torus(rng, 100)
    c1 = tlwe_encrypt(m1, keys.tlwe_key, 2.0**-15, rng)
    c2 = tlwe_encrypt(m2, keys.tlwe_key, 2.0**-15, rng)
    d = tlwe_decrypt(c1 + c2, keys.tlwe_key)
    assert np.array_equal(d, tlwe_decrypt(c1, keys.tlwe_key) + tlwe_decrypt(c2, keys.tlwe_key))


def test_tggsw_layout(rng):
    keys = keygen(SET_I, 0)
    g = tggsw_encrypt(1, keys, 0.0, SET_I, rng)
    assert g.data.shape == (SET_I.rows, SET_I.k + 1, SET_I.N)
    for i in range(SET_I.k + 1):
        for j in range(SET_I.l):
            row = g.row(i * SET_I.l + j)
            ph = tglwe_decrypt(row, keys.tglwe_key)
            # the message row (i = k) carries m * g_j; mask rows carry -s_i * m * g_j
            if i == SET_I.k:
                assert ph[0] == 2 ** (32 - (j + 1) * SET_I.beta) and not ph[1:].any()


@pytest.mark.parametrize("a, digits", [(0, (0, 0)), (0x12345678, (18, 52)), (0x0000FF80, (0, 1))])
def test_gadget_examples(a, digits):
    d = gadget_decompose(np.uint32(a), 8, 2)
    assert tuple(d.tolist()) == digits
    if a == 0x0000FF80:
        assert gadget_recompose(d, 8) == 0x00010000


def test_gadget_boundaries():
    beta, l = 8, 2
    step = 1 << (32 - l * beta)
    base = np.arange(0, 2**32, step * 4099, dtype=np.uint64)
    xs = np.concatenate([base + o for o in (0, step // 2 - 1, step // 2, step // 2 + 1, step - 1)])
    xs = (xs & 0xFFFFFFFF).astype(np.uint32)
    d = gadget_decompose(xs, beta, l)
    err = signed(gadget_recompose(d, beta) - xs)
    assert np.abs(err).max() <= step // 2
    assert d.min() >= -128 and d.max() < 128


def test_gadget_rejects_bad_params():
    with pytest.raises(ValueError):
        gadget_decompose(np.uint32(1), 11, 3)


def test_sample_extract(rng):
    keys = keygen(SET_I, 0)
    F = uniform_torus(rng, SET_I.N)
    triv = sample_extract(TglweCiphertext.trivial(F, SET_I.k))
    assert not triv.a.any() and triv.b == F[0]
    mu = np.zeros(SET_I.N, np.uint32)
    mu[0] = 2**30
    ct = tglwe_encrypt(mu, keys.tglwe_key, 0.0, rng)
    assert tlwe_decrypt(sample_extract(ct), keys.extracted_key) == 2**30


def test_serialization_roundtrip(rng):
    keys = keygen(SET_I, 3)
    k2 = serialize.loads(serialize.dumps(keys, SET_I), SET_I)
    assert np.array_equal(k2.tlwe_key, keys.tlwe_key) and np.array_equal(k2.tglwe_key, keys.tglwe_key)
    ct = tlwe_encrypt(uniform_torus(rng, 3), keys.tlwe_key, 0.0, rng)
    c2 = serialize.loads(serialize.dumps(ct, SET_I), SET_I)
    assert isinstance(c2, TlweCiphertext) and np.array_equal(c2.data, ct.data)
    g = tggsw_encrypt(1, keys, 0.0, SET_I, rng)
    assert np.array_equal(serialize.loads(serialize.dumps(g, SET_I), SET_I).data, g.data)
    assert '"type": "TlweCiphertext"' in serialize.to_json(ct, SET_I)


def test_serialization_rejects_mismatch(rng):
    keys = keygen(SET_I, 3)
    blob = serialize.dumps(keys, SET_I)
    with pytest.raises(ValueError, match="fingerprint"):
        serialize.loads(blob, SET_II)
    with pytest.raises(ValueError, match="magic"):
        serialize.loads(b"XXXX" + blob[4:], SET_I)
    with pytest.raises(ValueError):
        serialize.loads(blob[:5], SET_I)
