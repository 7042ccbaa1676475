"""ctypes binding to libsodium's ristretto255 primitives."""

from __future__ import annotations

import ctypes
import ctypes.util
import os

_lib = None
for _name in filter(None, [os.environ.get("TAP_LIBSODIUM"), ctypes.util.find_library("sodium"),
                           "libsodium.so.23", "libsodium.so"]):
    try:
        _lib = ctypes.CDLL(_name)
        break
    except OSError:
        continue

if _lib is None or not hasattr(_lib, "crypto_core_ristretto255_add"):
    raise ImportError("libsodium with ristretto255 support not found")
if _lib.sodium_init() < 0:
    raise ImportError("sodium_init failed")

_add = _lib.crypto_core_ristretto255_add
_sub = _lib.crypto_core_ristretto255_sub
_mul = _lib.crypto_scalarmult_ristretto255
_base = _lib.crypto_scalarmult_ristretto255_base
_from_hash = _lib.crypto_core_ristretto255_from_hash
_valid = _lib.crypto_core_ristretto255_is_valid_point
for _f in (_add, _sub, _mul, _base, _from_hash, _valid):
    _f.restype = ctypes.c_int

L = 2**252 + 27742317777372353535851937790883648493
_ZERO = bytes(32)


def is_valid(data: bytes) -> bool:
    # some libsodium builds ignore the top bit, which a canonical encoding never sets
    return len(data) == 32 and not data[31] & 0x80 and _valid(data) == 1


def add(a: bytes, b: bytes) -> bytes:
    out = ctypes.create_string_buffer(32)
    if _add(out, a, b) != 0:
        raise ValueError("invalid ristretto255 encoding")
    return out.raw


def sub(a: bytes, b: bytes) -> bytes:
    out = ctypes.create_string_buffer(32)
    if _sub(out, a, b) != 0:
        raise ValueError("invalid ristretto255 encoding")
    return out.raw


def mul(k: int, a: bytes) -> bytes:
    k %= L
    if k == 0 or a == _ZERO:
        return _ZERO
    out = ctypes.create_string_buffer(32)
    # -1 signals an identity result (or a bad input, which callers never pass)
    _mul(out, k.to_bytes(32, "little"), a)
    return out.raw


def base_mul(k: int) -> bytes:
    k %= L
    if k == 0:
        return _ZERO
    out = ctypes.create_string_buffer(32)
    _base(out, k.to_bytes(32, "little"))
    return out.raw


def from_hash(h: bytes) -> bytes:
    out = ctypes.create_string_buffer(32)
    _from_hash(out, h)
    return out.raw
