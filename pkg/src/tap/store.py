"""Row store: in-memory indexes with optional append-only file persistence.

Record layout (each record preceded by its u32-BE length):
    time u32 | user-id (u32 length + UTF-8) | m (u16) | codes u32 * m | value u32 | seed (32)
"""

from __future__ import annotations

import os
import struct
import threading
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

from .crypto.group import scalar_from_bytes, scalar_to_bytes
from .crypto.hashing import lp, u32
from .errors import DecodeError, DuplicateUser


@dataclass(frozen=True)
class Row:
    time: int
    user_id: str
    types: tuple
    value: int
    seed: int

    def encode(self) -> bytes:
        body = (u32(self.time) + lp(self.user_id.encode("utf-8")) + struct.pack(">H", len(self.types))
                + b"".join(u32(c) for c in self.types) + u32(self.value) + scalar_to_bytes(self.seed))
        return u32(len(body)) + body

    @classmethod
    def decode(cls, body: bytes) -> "Row":
        try:
            off = 0
            (time,) = struct.unpack_from(">I", body, off)
            off += 4
            (n,) = struct.unpack_from(">I", body, off)
            off += 4
            user = body[off:off + n].decode("utf-8")
            off += n
            (m,) = struct.unpack_from(">H", body, off)
            off += 2
            codes = struct.unpack_from(f">{m}I", body, off)
            off += 4 * m
            (value,) = struct.unpack_from(">I", body, off)
            off += 4
            seed = scalar_from_bytes(body[off:off + 32])
            if off + 32 != len(body):
                raise DecodeError("trailing bytes in row record")
        except (struct.error, UnicodeDecodeError) as exc:
            raise DecodeError(f"bad row record: {exc}") from None
        return cls(time, user, tuple(codes), value, seed)


class RowStore:
    def __init__(self, path: str | os.PathLike | None = None):
        self.path = Path(path) if path is not None else None
        self._by_user_epoch: dict[tuple[str, int], Row] = {}
        self._by_bucket: dict[tuple[int, tuple], list[Row]] = defaultdict(list)
        self._epochs: dict[int, list[Row]] = defaultdict(list)
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            for row in self._read_file():
                self._index(row)

    def _read_file(self):
        data = self.path.read_bytes()
        off = 0
        while off < len(data):
            if off + 4 > len(data):
                raise DecodeError("truncated row store")
            (n,) = struct.unpack_from(">I", data, off)
            off += 4
            if off + n > len(data):
                raise DecodeError("truncated row store")
            yield Row.decode(data[off:off + n])
            off += n

    def _index(self, row: Row) -> None:
        self._by_user_epoch[(row.user_id, row.time)] = row
        self._by_bucket[(row.time, row.types)].append(row)
        self._epochs[row.time].append(row)

    def add_epoch(self, rows: list[Row]) -> None:
        """Append one epoch's rows atomically with respect to readers."""
        seen = set()
        for r in rows:
            k = (r.user_id, r.time)
            if k in seen or k in self._by_user_epoch:
                raise DuplicateUser(f"user {r.user_id!r} already has a row at epoch {r.time}")
            seen.add(k)
        with self._lock:
            if self.path is not None and rows:
                with open(self.path, "ab") as f:
                    f.write(b"".join(r.encode() for r in rows))
                    f.flush()
                    os.fsync(f.fileno())
            for r in rows:
                self._index(r)

    def get(self, user_id: str, time: int) -> Row | None:
        return self._by_user_epoch.get((user_id, time))

    def bucket(self, time: int, types: tuple) -> list[Row]:
        return list(self._by_bucket.get((time, tuple(types)), ()))

    def buckets_at(self, time: int) -> list[tuple]:
        return sorted({r.types for r in self._epochs.get(time, ())})

    def epoch_rows(self, time: int) -> list[Row]:
        return list(self._epochs.get(time, ()))

    def epochs(self) -> list[int]:
        return sorted(self._epochs)

    def __len__(self) -> int:
        return len(self._by_user_epoch)
