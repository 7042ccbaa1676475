"""SHA-256 digests with domain tags, plus the fixed-width integer encodings
that feed them."""

from __future__ import annotations

import hashlib

DIGEST_LEN = 32

TAG_SUM_LEAF = b"\x00"
TAG_SUM_NODE = b"\x01"
TAG_PREFIX_LEAF = b"\x02"
TAG_PREFIX_NODE = b"\x03"

ZERO_DIGEST = bytes(DIGEST_LEN)


def hash_bytes(*parts: bytes) -> bytes:
    h = hashlib.sha256()
    for p in parts:
        h.update(p)
    return h.digest()


# empty sum-tree node: hash of a single zero byte
EMPTY_SUM_HASH = hash_bytes(b"\x00")


def u32(n: int) -> bytes:
    return n.to_bytes(4, "big")


def u64(n: int) -> bytes:
    return n.to_bytes(8, "big")


def lp(data: bytes) -> bytes:
    """Length-prefix with a u32."""
    return u32(len(data)) + data


def id_hash(user_id: str, time: int) -> bytes:
    return hash_bytes(lp(user_id.encode("utf-8")), u64(time))
