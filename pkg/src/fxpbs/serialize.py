"""Binary and JSON serialization of keys, ciphertexts and bootstrapping keys.

Binary layout: a 16-byte header (4-byte magic, u16 version, u16 kind,
u64 parameter fingerprint), a u32 word count of the shape followed by the
shape itself, then the payload as little-endian words.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .params import TfheParams
from .torus import SecretKeys, TggswCiphertext, TglweCiphertext, TlweCiphertext

MAGIC = b"FXPB"
VERSION = 1
HEADER = struct.Struct("<4sHHQ")

KIND_KEYS = 1
KIND_TLWE = 2
KIND_TGLWE = 3
KIND_TGGSW = 4
KIND_BK_SPECTRUM = 5

_CT_KINDS = {TlweCiphertext: KIND_TLWE, TglweCiphertext: KIND_TGLWE, TggswCiphertext: KIND_TGGSW}
_KIND_CT = {v: k for k, v in _CT_KINDS.items()}


def _pack(kind: int, params: TfheParams, arrays: list[np.ndarray], dtype="<u4") -> bytes:
    out = [HEADER.pack(MAGIC, VERSION, kind, params.digest())]
    for arr in arrays:
        out.append(struct.pack("<I", arr.ndim))
        out.append(np.asarray(arr.shape, dtype="<u4").tobytes())
        out.append(np.ascontiguousarray(arr).astype(dtype).tobytes())
    return b"".join(out)


def _unpack_header(buf: bytes, params: TfheParams) -> tuple[int, int]:
    if len(buf) < HEADER.size:
        raise ValueError("truncated header")
    magic, version, kind, digest = HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise ValueError("bad magic")
    if version != VERSION:
        raise ValueError(f"unsupported version {version}")
    if digest != params.digest():
        raise ValueError("parameter fingerprint mismatch")
    return kind, HEADER.size


def _read_array(buf: bytes, off: int, dtype="<u4") -> tuple[np.ndarray, int]:
    (ndim,) = struct.unpack_from("<I", buf, off)
    off += 4
    shape = tuple(np.frombuffer(buf, dtype="<u4", count=ndim, offset=off).tolist())
    off += 4 * ndim
    count = int(np.prod(shape, dtype=np.int64))
    arr = np.frombuffer(buf, dtype=dtype, count=count, offset=off).reshape(shape)
    return arr, off + count * np.dtype(dtype).itemsize


def dumps(obj, params: TfheParams) -> bytes:
    if isinstance(obj, SecretKeys):
        return _pack(KIND_KEYS, params, [obj.tlwe_key, obj.tglwe_key])
    kind = _CT_KINDS.get(type(obj))
    if kind is None:
        raise TypeError(f"cannot serialize {type(obj).__name__}")
    return _pack(kind, params, [obj.data])


def loads(buf: bytes, params: TfheParams):
    kind, off = _unpack_header(buf, params)
    if kind == KIND_KEYS:
        s, off = _read_array(buf, off)
        z, off = _read_array(buf, off)
        return SecretKeys(params, s.astype(np.int64), z.astype(np.int64))
    if kind in _KIND_CT:
        data, _ = _read_array(buf, off)
        return _KIND_CT[kind](data.astype(np.uint32))
    if kind == KIND_BK_SPECTRUM:
        from .pbs import BootstrappingKey
        return BootstrappingKey.from_bytes(buf[off:], params)
    raise ValueError(f"unknown object kind {kind}")


def dump_bk(bk, params: TfheParams) -> bytes:
    return HEADER.pack(MAGIC, VERSION, KIND_BK_SPECTRUM, params.digest()) + bk.to_bytes()


def to_json(obj, params: TfheParams) -> str:
    """Human-readable export; arrays become nested lists of integers."""
    doc = {"params": params.to_dict(), "type": type(obj).__name__}
    if isinstance(obj, SecretKeys):
        doc["tlwe_key"] = obj.tlwe_key.tolist()
        doc["tglwe_key"] = obj.tglwe_key.tolist()
    elif type(obj) in _CT_KINDS:
        doc["shape"] = list(obj.data.shape)
        doc["data"] = obj.data.tolist()
    else:
        raise TypeError(f"cannot export {type(obj).__name__}")
    return json.dumps(doc)
