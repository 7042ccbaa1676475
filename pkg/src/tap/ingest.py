"""CSV loading: header ``Time,ID,<type columns>,Value``, one epoch per distinct Time."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

from .errors import DuplicateUser, EpochOutOfOrder, SchemaError, ValueOutOfRange
from .schema import Schema
from .sum_tree import MAX_VALUE


@dataclass(frozen=True)
class IngestResult:
    epochs: int
    rows: int
    buckets: int
    digests: tuple  # (epoch, digest) pairs, gap epochs included


def read_csv(path: str | os.PathLike, schema: Schema) -> dict[int, list[tuple]]:
    """Parse and validate the whole file; returns time -> [(user, codes, value)]."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return {}
        header = [h.strip() for h in header]
        expected = ["Time", "ID", *(a.name for a in schema.types), "Value"]
        if [h.lower() for h in header] != [h.lower() for h in expected]:
            raise SchemaError(f"CSV header {header} does not match {expected}")
        epochs: dict[int, list[tuple]] = {}
        seen = set()
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(expected):
                raise SchemaError(f"line {lineno}: expected {len(expected)} columns, got {len(rec)}")
            rec = [c.strip() for c in rec]
            try:
                t, value = int(rec[0]), int(rec[-1])
            except ValueError:
                raise SchemaError(f"line {lineno}: Time and Value must be integers") from None
            if t < 0 or t >= 1 << schema.time_bits:
                raise SchemaError(f"line {lineno}: time {t} does not fit the schema")
            if not 0 <= value < MAX_VALUE:
                raise ValueOutOfRange(f"line {lineno}: value {value} outside [0, 2^32)")
            user = rec[1]
            if (user, t) in seen:
                raise DuplicateUser(f"line {lineno}: second row for {user!r} at time {t}", user=user, epoch=t)
            seen.add((user, t))
            epochs.setdefault(t, []).append((user, schema.codes(rec[2:-1]), value))
        return epochs


def ingest_csv(path: str | os.PathLike, schema: Schema, sink) -> IngestResult:
    """Insert every epoch of the file into ``sink`` (a TapServer or TapClient),
    filling skipped times with empty epochs. ``sink.epoch`` or
    ``sink.current_epoch()`` gives the last published epoch."""
    epochs = read_csv(path, schema)
    current = sink.epoch if hasattr(sink, "epoch") else sink.current_epoch()
    if epochs and min(epochs) <= current:
        raise EpochOutOfOrder(f"CSV starts at time {min(epochs)} but epoch {current} is already published")
    digests, rows, buckets = [], 0, 0
    for t in sorted(epochs):
        for gap in range(current + 1, t):
            digests.append((gap, sink.insert_epoch(gap, [])))
        batch = epochs[t]
        digests.append((t, sink.insert_epoch(t, batch)))
        rows += len(batch)
        buckets += len({codes for _, codes, _ in batch})
        current = t
    return IngestResult(len(epochs), rows, buckets, tuple(digests))
