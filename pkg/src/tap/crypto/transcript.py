"""Fiat-Shamir transcript over SHA-512."""

from __future__ import annotations

import hashlib

from .group import ORDER, Point


class Transcript:
    def __init__(self, label: bytes):
        self._state = hashlib.sha512(b"tap-transcript" + len(label).to_bytes(4, "big") + label).digest()

    def append(self, label: bytes, data: bytes) -> None:
        h = hashlib.sha512(self._state)
        h.update(len(label).to_bytes(4, "big") + label)
        h.update(len(data).to_bytes(4, "big") + data)
        self._state = h.digest()

    def append_point(self, label: bytes, p: Point) -> None:
        self.append(label, bytes(p))

    def append_scalar(self, label: bytes, k: int) -> None:
        self.append(label, (k % ORDER).to_bytes(32, "big"))

    def challenge(self, label: bytes) -> int:
        self.append(b"challenge", label)
        c = int.from_bytes(hashlib.sha512(self._state + b"out").digest(), "big") % ORDER
        return c or 1
