"""Compiled fixed-point kernels on int64 raw arrays.

Products are formed exactly (128-bit when `wide`), accumulated exactly and
rounded once per stored output. Rounding codes: 0 truncate, 1 half-up,
2 nearest-even. Overflow codes: 0 wrap, 1 saturate, 2 trap (wraps here and
is raised by the caller from the returned count).
"""

import numpy as np
from numba import njit

U0 = np.uint64(0)
U1 = np.uint64(1)
U32 = np.uint64(32)
U63 = np.uint64(63)
U64 = np.uint64(64)
M32 = np.uint64(0xFFFFFFFF)

# array datapath width limit: keeps 128-bit sums of products from overflowing
MAX_ARRAY_WIDTH = 60


@njit(inline="always")
def _mul128(a, b):
    ua = np.uint64(a)
    ub = np.uint64(b)
    a0 = ua & M32
    a1 = ua >> U32
    b0 = ub & M32
    b1 = ub >> U32
    p00 = a0 * b0
    p01 = a0 * b1
    p10 = a1 * b0
    p11 = a1 * b1
    mid = (p00 >> U32) + (p01 & M32) + (p10 & M32)
    lo = (mid << U32) | (p00 & M32)
    hi = p11 + (p01 >> U32) + (p10 >> U32) + (mid >> U32)
    if a < 0:
        hi = hi - ub
    if b < 0:
        hi = hi - ua
    return hi, lo


@njit(inline="always")
def _add128(h1, l1, h2, l2):
    lo = l1 + l2
    hi = h1 + h2
    if lo < l1:
        hi = hi + U1
    return hi, lo


@njit(inline="always")
def _neg128(h, l):
    lo = ~l + U1
    hi = ~h
    if lo == U0:
        hi = hi + U1
    return hi, lo


@njit(inline="always")
def _sar128(h, l, s):
    # arithmetic right shift, 1 <= s <= 127; h is the high word as uint64 bits
    hs = np.int64(h)
    if s < 64:
        us = np.uint64(s)
        lo = (l >> us) | (h << (U64 - us))
        hi = np.uint64(hs >> s)
    else:
        lo = np.uint64(hs >> (s - 64))
        hi = np.uint64(hs >> 63)
    return hi, lo


@njit(inline="always")
def _fit(v, width, omode):
    # returns (value, overflowed)
    if width >= 64:
        return v, 0
    lim = np.int64(1) << (width - 1)
    if v >= -lim and v < lim:
        return v, 0
    if omode == 1:
        if v < 0:
            return -lim, 1
        return lim - 1, 1
    sh = 64 - width
    return (v << sh) >> sh, 1


@njit(inline="always")
def _round64(x, s, rmode):
    if s <= 0:
        return x << (-s)
    if rmode == 0:
        return x >> s
    if rmode == 1:
        return (x + (np.int64(1) << (s - 1))) >> s
    q = x >> s
    rem = x - (q << s)
    half = np.int64(1) << (s - 1)
    if rem > half or (rem == half and (q & 1) == 1):
        q += 1
    return q


@njit(inline="always")
def _round128(h, l, s, width, rmode, omode):
    # round (h, l) >> s into a width-bit value; s >= 0
    if s > 0:
        if rmode == 1 or rmode == 2:
            if s - 1 < 64:
                c_h = U0
                c_l = U1 << np.uint64(s - 1)
            else:
                c_h = U1 << np.uint64(s - 65)
                c_l = U0
            if rmode == 2:
                # half - 1 + (bit s of the unrounded value)
                c_h, c_l = _add128(c_h, c_l, ~U0, ~U0)
                if s < 64:
                    bit = (l >> np.uint64(s)) & U1
                else:
                    bit = (h >> np.uint64(s - 64)) & U1
                c_h, c_l = _add128(c_h, c_l, U0, bit)
            h, l = _add128(h, l, c_h, c_l)
        h, l = _sar128(h, l, s)
    v = np.int64(l)
    if np.int64(h) != (v >> 63):
        # beyond 64 bits
        if omode == 1:
            lim = np.int64(1) << (width - 1) if width < 64 else np.int64(0)
            if np.int64(h) < 0:
                return -lim if width < 64 else np.int64(-9223372036854775807 - 1), 1
            return lim - 1 if width < 64 else np.int64(9223372036854775807), 1
        if width >= 64:
            return v, 1
        sh = 64 - width
        return (v << sh) >> sh, 1
    return _fit(v, width, omode)


@njit(inline="always")
def _gauss_narrow(a, b, cmd, cpd, c):
    z = c * (a - b)
    return cmd * b + z, cpd * a - z


@njit(inline="always")
def _gauss_wide(a, b, cmd, cpd, c):
    zh, zl = _mul128(c, a - b)
    xh, xl = _mul128(cmd, b)
    yh, yl = _mul128(cpd, a)
    xh, xl = _add128(xh, xl, zh, zl)
    nzh, nzl = _neg128(zh, zl)
    yh, yl = _add128(yh, yl, nzh, nzl)
    return xh, xl, yh, yl


@njit(cache=True)
def round_shift_array(x, s, width, rmode, omode, out):
    """out = fit(round(x / 2^s)); x is any int64 array (flattened)."""
    n = 0
    xf = x.ravel()
    of = out.ravel()
    for i in range(xf.size):
        v, o = _fit(_round64(xf[i], s, rmode), width, omode)
        of[i] = v
        n += o
    return n


@njit(cache=True)
def cmul_const(re, im, cmd, cpd, c, kind, s, width, rmode, omode, wide):
    """In-place x[r, m] *= w[m] for 2-D (rows, M) arrays.

    kind[m]: 0 general twiddle, 1 exact identity. The product (fraction
    bits f_x + f_w) is rounded by s bits into width.
    """
    n = 0
    R, M = re.shape
    for r in range(R):
        for m in range(M):
            if kind[m] == 1:
                continue
            a = re[r, m]
            b = im[r, m]
            if wide:
                xh, xl, yh, yl = _gauss_wide(a, b, cmd[m], cpd[m], c[m])
                vr, o1 = _round128(xh, xl, s, width, rmode, omode)
                vi, o2 = _round128(yh, yl, s, width, rmode, omode)
            else:
                x, y = _gauss_narrow(a, b, cmd[m], cpd[m], c[m])
                vr, o1 = _fit(_round64(x, s, rmode), width, omode)
                vi, o2 = _fit(_round64(y, s, rmode), width, omode)
            re[r, m] = vr
            im[r, m] = vi
            n += o1 + o2
    return n


@njit(cache=True)
def fft_stage(re, im, h, cmd, cpd, c, kind, s, scale, width, rmode, omode, wide):
    """One radix-2 DIT stage in place on (rows, M) arrays.

    Butterfly pairs are (b + t, b + t + h) for blocks b of size 2h. Twiddle
    t has kind 0 general, 1 identity, 2 multiply by +j, 3 multiply by -j.
    The twiddle product is rounded by s bits into width; the sum and
    difference are then optionally halved with the same rounding rule.
    """
    n = 0
    R, M = re.shape
    for r in range(R):
        for b in range(0, M, 2 * h):
            for t in range(h):
                i0 = b + t
                i1 = i0 + h
                ar = re[r, i1]
                ai = im[r, i1]
                k = kind[t]
                if k == 1:
                    vr = ar
                    vi = ai
                elif k == 2:
                    vr = -ai
                    vi = ar
                elif k == 3:
                    vr = ai
                    vi = -ar
                else:
                    if wide:
                        xh, xl, yh, yl = _gauss_wide(ar, ai, cmd[t], cpd[t], c[t])
                        vr, o1 = _round128(xh, xl, s, width, rmode, omode)
                        vi, o2 = _round128(yh, yl, s, width, rmode, omode)
                    else:
                        x, y = _gauss_narrow(ar, ai, cmd[t], cpd[t], c[t])
                        vr, o1 = _fit(_round64(x, s, rmode), width, omode)
                        vi, o2 = _fit(_round64(y, s, rmode), width, omode)
                    n += o1 + o2
                if k == 2 or k == 3:
                    # negation of the most negative value leaves the range
                    vr, o1 = _fit(vr, width, omode)
                    vi, o2 = _fit(vi, width, omode)
                    n += o1 + o2
                ur = re[r, i0]
                ui = im[r, i0]
                sr0 = ur + vr
                si0 = ui + vi
                sr1 = ur - vr
                si1 = ui - vi
                if scale:
                    sr0 = _round64(sr0, 1, rmode)
                    si0 = _round64(si0, 1, rmode)
                    sr1 = _round64(sr1, 1, rmode)
                    si1 = _round64(si1, 1, rmode)
                sr0, o1 = _fit(sr0, width, omode)
                si0, o2 = _fit(si0, width, omode)
                sr1, o3 = _fit(sr1, width, omode)
                si1, o4 = _fit(si1, width, omode)
                n += o1 + o2 + o3 + o4
                re[r, i0] = sr0
                im[r, i0] = si0
                re[r, i1] = sr1
                im[r, i1] = si1
    return n


@njit(cache=True)
def mac(dre, dim, bcmd, bcpd, bc, s, width, rmode, omode, wide, ore, oim):
    """out[r, j, m] = round(sum_t d[r, t, m] * bk[t, j, m]).

    d is (rows, T, M), bk components (T, J, M), out (rows, J, M). The T
    products are accumulated exactly before the single rounding.
    """
    n = 0
    R, T, M = dre.shape
    J = bcmd.shape[1]
    for r in range(R):
        for j in range(J):
            for m in range(M):
                if wide:
                    xh = U0
                    xl = U0
                    yh = U0
                    yl = U0
                    for t in range(T):
                        ph, pl, qh, ql = _gauss_wide(dre[r, t, m], dim[r, t, m], bcmd[t, j, m], bcpd[t, j, m], bc[t, j, m])
                        xh, xl = _add128(xh, xl, ph, pl)
                        yh, yl = _add128(yh, yl, qh, ql)
                    vr, o1 = _round128(xh, xl, s, width, rmode, omode)
                    vi, o2 = _round128(yh, yl, s, width, rmode, omode)
                else:
                    x = np.int64(0)
                    y = np.int64(0)
                    for t in range(T):
                        p, q = _gauss_narrow(dre[r, t, m], dim[r, t, m], bcmd[t, j, m], bcpd[t, j, m], bc[t, j, m])
                        x += p
                        y += q
                    vr, o1 = _fit(_round64(x, s, rmode), width, omode)
                    vi, o2 = _fit(_round64(y, s, rmode), width, omode)
                ore[r, j, m] = vr
                oim[r, j, m] = vi
                n += o1 + o2
    return n


@njit(cache=True)
def fft_stage_ref(re, im, h, wr, wi, scale):
    """Double-precision counterpart of fft_stage (exact halving)."""
    R, M = re.shape
    for r in range(R):
        for b in range(0, M, 2 * h):
            for t in range(h):
                i0 = b + t
                i1 = i0 + h
                ar = re[r, i1]
                ai = im[r, i1]
                vr = ar * wr[t] - ai * wi[t]
                vi = ar * wi[t] + ai * wr[t]
                ur = re[r, i0]
                ui = im[r, i0]
                if scale:
                    re[r, i0] = (ur + vr) * 0.5
                    im[r, i0] = (ui + vi) * 0.5
                    re[r, i1] = (ur - vr) * 0.5
                    im[r, i1] = (ui - vi) * 0.5
                else:
                    re[r, i0] = ur + vr
                    im[r, i0] = ui + vi
                    re[r, i1] = ur - vr
                    im[r, i1] = ui - vi


@njit(cache=True)
def torus_round(x, out):
    """out = floor(x * 2^32 + 1/2) mod 2^32 as uint32."""
    xf = x.ravel()
    of = out.ravel()
    for i in range(xf.size):
        v = np.floor(xf[i] * 4294967296.0 + 0.5)
        v = v - np.floor(v / 4294967296.0) * 4294967296.0
        of[i] = np.uint32(np.uint64(v))
