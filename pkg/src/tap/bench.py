"""Proof-size and timing benchmarks on a synthetic metering workload.

Each user sits in one region and is flagged industrial with a fixed
probability; every epoch each user submits one reading. Timings are split
into prefix-tree proof generation and verification, sum-tree proof
generation and verification, and "other" (serialization round-trip, which
stands in for transport in this in-process harness).
"""

from __future__ import annotations

import statistics
import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from . import wire
from .auditor import Auditor
from .crypto.group import BACKEND
from .prefix_tree import RangeSpec, check_extension, check_range_cover
from .schema import Schema, TypeAttribute
from .server import TapServer
from .verifier import Verifier

MAX_READING = 1000

SIZE_ORDER = ("lookup", "sum", "minmax", "quantile", "audit")


@dataclass(frozen=True)
class Workload:
    users: int = 100
    regions: int = 10
    industrial: float = 0.2
    epochs: int = 10
    window: int = 3  # epochs covered by the range queries, ending at the latest
    seed: int = 7

    def schema(self) -> Schema:
        regions = TypeAttribute("region", {f"r{i}": i for i in range(self.regions)},
                                width=max(1, (self.regions - 1).bit_length()))
        kind = TypeAttribute("is_industrial", {"0": 0, "1": 1}, width=1)
        return Schema((regions, kind))


@dataclass
class BenchRecord:
    query: str
    proof_size: int
    prefix_gen: float
    prefix_verify: float
    sum_gen: float
    sum_verify: float
    other: float
    total: float

    @property
    def categories(self) -> float:
        return self.prefix_gen + self.prefix_verify + self.sum_gen + self.sum_verify + self.other


@dataclass
class BenchSummary:
    workload: Workload
    records: list = field(default_factory=list)  # one list of BenchRecord per repetition
    window_sizes: dict = field(default_factory=dict)  # window -> aggregate proof bytes
    backend: str = BACKEND

    def sizes(self, rep: int = 0) -> dict:
        return {r.query: r.proof_size for r in self.records[rep]}

    def group_sizes(self, rep: int = 0) -> dict:
        s = self.sizes(rep)
        return {
            "lookup": s["lookup"],
            "sum": max(s["sum"], s["count"], s["average"]),
            "minmax": max(s["min"], s["max"]),
            "quantile": min(s["median"], s["p05"]),
            "audit": s["audit"],
        }

    def ordering_ok(self, rep: int = 0) -> bool:
        """lookup < sum < min/max <= quantile < audit."""
        g = self.group_sizes(rep)
        return g["lookup"] < g["sum"] < g["minmax"] <= g["quantile"] < g["audit"]

    def median_ge_p05(self, rep: int = 0) -> bool:
        s = self.sizes(rep)
        return s["median"] >= s["p05"]

    def window_monotone(self) -> bool:
        ws = [self.window_sizes[w] for w in sorted(self.window_sizes)]
        return all(a < b for a, b in zip(ws, ws[1:]))

    def orderings_stable(self) -> bool:
        return all(self.ordering_ok(i) and self.median_ge_p05(i) for i in range(len(self.records)))

    def audit_bytes_per_epoch(self, rep: int = 0) -> float:
        return self.sizes(rep)["audit"] / min(self.workload.window, self.workload.epochs)

    def to_dict(self) -> dict:
        return {
            "workload": asdict(self.workload),
            "audit_bytes_per_epoch": self.audit_bytes_per_epoch(),
            "backend": self.backend,
            "repetitions": [[asdict(r) for r in rep] for rep in self.records],
            "sizes": self.sizes(),
            "window_sizes": {str(k): v for k, v in sorted(self.window_sizes.items())},
            "checks": {
                "size_ordering": self.ordering_ok(),
                "median_ge_p05": self.median_ge_p05(),
                "window_monotone": self.window_monotone(),
                "orderings_stable": self.orderings_stable(),
            },
        }


def build_server(wl: Workload, epochs: int | None = None, key: bytes = b"\x07" * 32) -> TapServer:
    rng = np.random.default_rng(wl.seed)
    schema = wl.schema()
    server = TapServer(schema, key)
    region = rng.integers(0, wl.regions, size=wl.users)
    industrial = rng.random(wl.users) < wl.industrial
    for t in range(wl.epochs if epochs is None else epochs):
        values = rng.integers(0, MAX_READING, size=wl.users)
        server.insert_epoch(t, [(f"user{u}", (int(region[u]), int(industrial[u])), int(values[u]))
                                for u in range(wl.users)])
    return server


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


def _record(query, gen, prefix_gen, verify, prefix_verify) -> BenchRecord:
    proof, t_gen = _timed(gen)
    _, t_pgen = _timed(prefix_gen)

    def roundtrip():
        data = wire.encode(proof)
        return data, wire.decode(data)

    (data, decoded), t_other = _timed(roundtrip)
    _, t_ver = _timed(lambda: verify(decoded))
    _, t_pver = _timed(lambda: prefix_verify(decoded))
    # prefix work is part of the full call, so the sum-tree share is the remainder
    p_gen, p_ver = min(t_pgen, t_gen), min(t_pver, t_ver)
    return BenchRecord(query, len(data), p_gen, p_ver, t_gen - p_gen, t_ver - p_ver, t_other,
                       t_gen + t_ver + t_other)


def run_once(wl: Workload, server: TapServer | None = None) -> list[BenchRecord]:
    server = server or build_server(wl)
    schema, layout = server.schema, server.layout
    verifier = Verifier(schema)
    at = server.epoch
    digest = server.bulletin.get(at)
    snap = server.snapshot(at)
    full_types = tuple((0, (1 << a.width) - 1) for a in schema.types)
    spec = RangeSpec(max(0, at - wl.window + 1), at, full_types)
    rng = np.random.default_rng(wl.seed + 1)
    u = int(rng.integers(0, wl.users))
    user = f"user{u}"
    row = server.store.get(user, at)
    seed = server.epoch_secret(user, at)
    key = layout.encode(at, row.types)

    cover_gen = lambda: snap.covered(spec)  # noqa: E731
    cover_ver = lambda p: check_range_cover(layout, spec, p.cover, digest)  # noqa: E731
    records = [
        _record("lookup", lambda: server.lookup(user, row.types, at, at), lambda: snap.inclusion_proof(key),
                lambda p: verifier.check_lookup(p, user, row.types, at, seed, digest),
                lambda p: p.prefix.root_hash(layout)),
    ]
    for name in ("sum", "count", "average"):
        records.append(_record(name, lambda: server.query_aggregate(spec, at), cover_gen,
                               lambda p: verifier.check_aggregate(spec, p, digest), cover_ver))
    for mode in ("min", "max"):
        records.append(_record(mode, lambda: server.query_minmax(spec, mode, at), cover_gen,
                               lambda p: verifier.check_minmax(spec, p, digest, mode), cover_ver))
    for name, q in (("median", Fraction(1, 2)), ("p05", Fraction(1, 20))):
        records.append(_record(name, lambda: server.query_quantile(spec, q, at), cover_gen,
                               lambda p: verifier.check_quantile(spec, q, p, digest), cover_ver))
    # the audit spans the same epochs as the range queries
    t_old = spec.t_min - 1
    auditor = Auditor(schema, server.bulletin)
    records.append(_record(
        "audit", lambda: server.audit_proof(t_old, at), lambda: snap.extension_proof(t_old, at),
        lambda p: _require(auditor.epoch_check(t_old, at, p).ok),
        lambda p: check_extension(layout, p.extension, server.bulletin.get(t_old), digest, t_old, at)))
    return records


def _require(ok: bool) -> None:
    if not ok:
        raise AssertionError("benchmark proof failed to verify")


def window_sizes(server: TapServer, windows) -> dict:
    at = server.epoch
    full_types = tuple((0, (1 << a.width) - 1) for a in server.schema.types)
    return {w: wire.encoded_size(server.query_aggregate(RangeSpec(max(0, at - w + 1), at, full_types), at))
            for w in windows}


def run_bench(wl: Workload = Workload(), repetitions: int = 1, windows=(1, 10)) -> BenchSummary:
    """Repetitions use fresh workloads (seed + i) so orderings can be compared across them."""
    summary = BenchSummary(wl)
    for i in range(repetitions):
        rep_wl = Workload(**{**asdict(wl), "seed": wl.seed + i})
        server = build_server(rep_wl, max(wl.epochs, max(windows)))
        summary.records.append(run_once(rep_wl, server))
        if i == 0:
            summary.window_sizes = window_sizes(server, windows)
    return summary


# growth spot checks

@dataclass
class ScalingPoint:
    rows: int  # stored rows before the timed inserts
    epochs: int
    insert_seconds: float  # median time to insert one more epoch of ``users`` rows
    sum_proof_size: int  # aggregate proof over the fixed first-epochs range


@dataclass
class ScalingReport:
    users: int
    fixed_range_epochs: int
    points: list = field(default_factory=list)

    @property
    def insert_ratio(self) -> float:
        return self.points[-1].insert_seconds / self.points[0].insert_seconds

    @property
    def row_ratio(self) -> float:
        return self.points[-1].rows / self.points[0].rows

    @property
    def size_growth(self) -> int:
        sizes = [p.sum_proof_size for p in self.points]
        return max(sizes) - min(sizes)

    def to_dict(self) -> dict:
        return {"users": self.users, "fixed_range_epochs": self.fixed_range_epochs,
                "points": [asdict(p) for p in self.points], "insert_ratio": self.insert_ratio,
                "row_ratio": self.row_ratio, "size_growth_bytes": self.size_growth}


def scaling_check(sizes=(1000, 10000, 100000), users: int = 100, fixed_range_epochs: int = 10,
                  probes: int = 5, seed: int = 11) -> ScalingReport:
    """Grow one server through the requested row counts; at each, time a few
    extra epoch inserts and measure an aggregate proof over a fixed range."""
    wl = Workload(users=users, seed=seed)
    schema = wl.schema()
    server = TapServer(schema, b"\x0b" * 32)
    rng = np.random.default_rng(seed)
    region = rng.integers(0, wl.regions, size=users)
    industrial = rng.random(users) < wl.industrial
    full_types = tuple((0, (1 << a.width) - 1) for a in schema.types)
    fixed = RangeSpec(0, fixed_range_epochs - 1, full_types)

    def epoch_rows():
        values = rng.integers(0, MAX_READING, size=users)
        return [(f"user{u}", (int(region[u]), int(industrial[u])), int(values[u])) for u in range(users)]

    report = ScalingReport(users, fixed_range_epochs)
    for target in sorted(sizes):
        while len(server.store) < target:
            server.insert_epoch(server.epoch + 1, epoch_rows())
        rows_at_start = len(server.store)
        timings = []
        for _ in range(probes):
            rows = epoch_rows()
            _, dt = _timed(lambda: server.insert_epoch(server.epoch + 1, rows))
            timings.append(dt)
        size = wire.encoded_size(server.query_aggregate(fixed))
        report.points.append(ScalingPoint(rows_at_start, server.epoch + 1, statistics.median(timings), size))
    return report


__all__ = ["Workload", "BenchRecord", "BenchSummary", "build_server", "run_once", "run_bench",
           "window_sizes", "ScalingPoint", "ScalingReport", "scaling_check", "SIZE_ORDER"]
