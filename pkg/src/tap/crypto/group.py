"""Prime-order group (ristretto255) and scalar field helpers.

Points are immutable wrappers around their canonical 32-byte encoding, so
equality and hashing are byte comparisons. Arithmetic goes through libsodium
when available and falls back to a pure-Python implementation otherwise.
"""

from __future__ import annotations

import hashlib
import secrets

from ..errors import InvalidPoint, NonCanonicalScalar

try:
    from . import _sodium as _backend
    BACKEND = "libsodium"
except ImportError:  # pragma: no cover - depends on the host
    from . import _ref25519 as _backend
    BACKEND = "python"

ORDER = 2**252 + 27742317777372353535851937790883648493
POINT_LEN = 32
SCALAR_LEN = 32
_ZERO = bytes(32)


def use_backend(name: str) -> None:
    """Switch arithmetic backend ("libsodium" or "python"). Test hook."""
    global _backend, BACKEND
    if name == "python":
        from . import _ref25519 as mod
    elif name == "libsodium":
        from . import _sodium as mod
    else:
        raise ValueError(name)
    _backend, BACKEND = mod, name


class Point:
    __slots__ = ("_enc",)

    def __init__(self, enc: bytes):
        # trusted constructor; use from_bytes for untrusted input
        self._enc = enc

    @classmethod
    def from_bytes(cls, data: bytes) -> "Point":
        data = bytes(data)
        if len(data) != POINT_LEN:
            raise InvalidPoint(f"point must be {POINT_LEN} bytes, got {len(data)}")
        if data != _ZERO and not _backend.is_valid(data):
            raise InvalidPoint("not a canonical ristretto255 encoding")
        return cls(data)

    @classmethod
    def identity(cls) -> "Point":
        return cls(_ZERO)

    @classmethod
    def base_mul(cls, k: int) -> "Point":
        return cls(_backend.base_mul(k % ORDER))

    @classmethod
    def hash_to_point(cls, label: bytes) -> "Point":
        return cls(_backend.from_hash(hashlib.sha512(label).digest()))

    def is_identity(self) -> bool:
        return self._enc == _ZERO

    def __bytes__(self) -> bytes:
        return self._enc

    def __add__(self, other: "Point") -> "Point":
        if self._enc == _ZERO:
            return other
        if other._enc == _ZERO:
            return self
        return Point(_backend.add(self._enc, other._enc))

    def __sub__(self, other: "Point") -> "Point":
        if other._enc == _ZERO:
            return self
        if self._enc == _ZERO:
            return -other
        return Point(_backend.sub(self._enc, other._enc))

    def __neg__(self) -> "Point":
        if self._enc == _ZERO:
            return self
        return Point(_backend.sub(_ZERO, self._enc))

    def __mul__(self, k: int) -> "Point":
        return Point(_backend.mul(k % ORDER, self._enc))

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        return isinstance(other, Point) and self._enc == other._enc

    def __hash__(self) -> int:
        return hash(self._enc)

    def __repr__(self) -> str:
        return f"Point({self._enc.hex()[:16]}…)"


def point_sum(points) -> Point:
    acc = Point.identity()
    for p in points:
        acc = acc + p
    return acc


def multiexp(scalars, points) -> Point:
    acc = Point.identity()
    for k, p in zip(scalars, points):
        k %= ORDER
        if k:
            acc = acc + p * k
    return acc


def scalar_to_bytes(k: int) -> bytes:
    return (k % ORDER).to_bytes(SCALAR_LEN, "big")


def scalar_from_bytes(data: bytes) -> int:
    if len(data) != SCALAR_LEN:
        raise NonCanonicalScalar(f"scalar must be {SCALAR_LEN} bytes")
    k = int.from_bytes(data, "big")
    if k >= ORDER:
        raise NonCanonicalScalar("scalar not reduced")
    return k


def scalar_from_hash(data: bytes) -> int:
    return int.from_bytes(hashlib.sha512(data).digest(), "big") % ORDER


def random_scalar(rng=None) -> int:
    if rng is None:
        return secrets.randbelow(ORDER - 1) + 1
    return rng.randrange(1, ORDER)


def inv(k: int) -> int:
    return pow(k, -1, ORDER)
