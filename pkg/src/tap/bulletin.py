"""Append-only digest log with equivocation detection.

Each on-disk record is ``epoch u64-BE | digest (32) | prev-record-hash (32)``,
chaining every record to the one before it. The genesis epoch (-1) is stored
as the all-ones u64.
"""

from __future__ import annotations

import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path

from .crypto.hashing import ZERO_DIGEST, hash_bytes
from .errors import BulletinUnavailable, DecodeError, EpochRegression, Equivocation, UnknownEpoch

GENESIS_EPOCH = -1
RECORD_LEN = 8 + 32 + 32
_U64_MAX = 2**64 - 1


def _encode_epoch(t: int) -> bytes:
    return (_U64_MAX if t == GENESIS_EPOCH else t).to_bytes(8, "big")


def _decode_epoch(b: bytes) -> int:
    v = int.from_bytes(b, "big")
    return GENESIS_EPOCH if v == _U64_MAX else v


@dataclass(frozen=True)
class BulletinEntry:
    epoch: int
    digest: bytes
    prev_hash: bytes
    published_at: float | None = None

    def record(self) -> bytes:
        return _encode_epoch(self.epoch) + self.digest + self.prev_hash

    @property
    def record_hash(self) -> bytes:
        return hash_bytes(self.record())


class Bulletin:
    """In-memory when ``path`` is None, otherwise backed by an append-only file."""

    def __init__(self, path: str | os.PathLike | None = None):
        self.path = Path(path) if path is not None else None
        self._entries: list[BulletinEntry] = []
        self._by_epoch: dict[int, BulletinEntry] = {}
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            self.refresh()

    def refresh(self) -> None:
        """Pick up records appended to the backing file by another process."""
        if self.path is None:
            return
        try:
            data = self.path.read_bytes()
        except OSError as exc:
            raise BulletinUnavailable(str(exc)) from None
        if len(data) % RECORD_LEN:
            raise DecodeError("bulletin file has a partial record")
        with self._lock:
            for off in range(len(self._entries) * RECORD_LEN, len(data), RECORD_LEN):
                rec = data[off:off + RECORD_LEN]
                entry = BulletinEntry(_decode_epoch(rec[:8]), rec[8:40], rec[40:72])
                self._check_next(entry)
                self._append_mem(entry)

    def _head_hash(self) -> bytes:
        return self._entries[-1].record_hash if self._entries else ZERO_DIGEST

    def _check_next(self, entry: BulletinEntry) -> None:
        if entry.prev_hash != self._head_hash():
            raise DecodeError("bulletin hash chain broken")
        if self._entries and entry.epoch <= self._entries[-1].epoch:
            raise DecodeError("bulletin epochs not increasing")

    def _append_mem(self, entry: BulletinEntry) -> None:
        self._entries.append(entry)
        self._by_epoch[entry.epoch] = entry

    def publish(self, t: int, digest: bytes) -> None:
        if len(digest) != 32:
            raise ValueError("digest must be 32 bytes")
        with self._lock:
            existing = self._by_epoch.get(t)
            if existing is not None:
                if existing.digest == digest:
                    return
                raise Equivocation(f"epoch {t} already published with a different digest", epoch=t)
            if self._entries and t <= self._entries[-1].epoch:
                raise EpochRegression(f"epoch {t} is not after {self._entries[-1].epoch}", epoch=t)
            if t < GENESIS_EPOCH:
                raise EpochRegression(f"epoch {t} precedes genesis")
            entry = BulletinEntry(t, bytes(digest), self._head_hash(), time.time())
            if self.path is not None:
                try:
                    with open(self.path, "ab") as f:
                        f.write(entry.record())
                        f.flush()
                        os.fsync(f.fileno())
                except OSError as exc:
                    raise BulletinUnavailable(str(exc)) from None
            self._append_mem(entry)

    def get(self, t: int) -> bytes:
        entry = self._by_epoch.get(t)
        if entry is None:
            raise UnknownEpoch(f"no digest published for epoch {t}", epoch=t)
        return entry.digest

    def latest(self) -> BulletinEntry | None:
        return self._entries[-1] if self._entries else None

    def epochs(self) -> list[int]:
        return [e.epoch for e in self._entries]

    def snapshot(self) -> tuple[tuple[int, bytes], ...]:
        return tuple((e.epoch, e.digest) for e in self._entries)

    def __len__(self) -> int:
        return len(self._entries)
