"""Epoch audits: append-only extension plus per-bucket sortedness (and,
when a value bound is configured, per-leaf bound) proofs."""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .bulletin import Bulletin
from .crypto.group import Point
from .crypto.rangeproof import WIDTH, RangeProof, verify_range
from .errors import TapError, VerificationError
from .prefix_tree import check_extension
from .proofs import AuditProof, BucketAudit
from .schema import Schema
from .sum_tree import SumLeaf, fold_leaves


@dataclass
class BucketResult:
    key: int
    time: int
    types: tuple
    leaves: int
    sortedness_checked: int = 0
    sorted_ok: bool = False
    bounds_checked: int = 0
    bounds_ok: bool = True
    error: str = ""

    @property
    def ok(self) -> bool:
        return self.sorted_ok and self.bounds_ok and not self.error


@dataclass
class AuditReport:
    t_old: int
    t_new: int
    extension_ok: bool = False
    buckets: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    sampled: int | None = None
    total_buckets: int = 0

    @property
    def ok(self) -> bool:
        return self.extension_ok and not self.failures and all(b.ok for b in self.buckets)

    @property
    def sortedness_proofs(self) -> int:
        return sum(b.sortedness_checked for b in self.buckets)

    @property
    def bound_proofs(self) -> int:
        return sum(b.bounds_checked for b in self.buckets)

    def lines(self) -> list[str]:
        out = [f"audit epochs=({self.t_old},{self.t_new}] ok={self.ok} extension_ok={self.extension_ok} "
               f"buckets={len(self.buckets)}/{self.total_buckets} sortedness={self.sortedness_proofs} "
               f"bounds={self.bound_proofs}"]
        for b in self.buckets:
            out.append(f"bucket time={b.time} types={','.join(map(str, b.types))} leaves={b.leaves} "
                       f"sorted={b.sorted_ok} bounds={b.bounds_ok}" + (f" error={b.error}" if b.error else ""))
        out += [f"failure {f}" for f in self.failures]
        return out


class Auditor:
    def __init__(self, schema: Schema, bulletin: Bulletin):
        self.schema = schema
        self.layout = schema.layout
        self.bulletin = bulletin

    def _check_bucket(self, key: int, phi: bytes, audit: BucketAudit) -> BucketResult:
        t, *codes = self.layout.decode(key)
        res = BucketResult(key, t, tuple(codes), 0)
        try:
            leaves = tuple(audit.leaves)
            if not leaves or not all(isinstance(x, SumLeaf) and len(x.commitments) == self.schema.z
                                     and all(isinstance(c, Point) for c in x.commitments)
                                     for x in leaves):
                raise VerificationError("malformed", "bucket leaves")
            res.leaves = len(leaves)
            if fold_leaves(list(leaves), self.schema.z).hash != phi:
                raise VerificationError("bucket-root-mismatch")
            if len(audit.sortedness) != len(leaves) - 1:
                raise VerificationError("sortedness-count", f"{len(audit.sortedness)} proofs for {len(leaves)} leaves")
            gamma = self.schema.gamma
            expected_bounds = len(leaves) if gamma is not None else 0
            if len(audit.bounds) != expected_bounds:
                raise VerificationError("bound-count")
            # the auditor forms each difference itself rather than trusting the server's
            pending = []
            for i, rp in enumerate(audit.sortedness):
                diff = leaves[i + 1].commitments[0] - leaves[i].commitments[0]
                pending.append(("sorted", diff, 0, WIDTH, rp))
            for leaf, rp in zip(leaves, audit.bounds):
                pending.append(("bound", leaf.commitments[0], 0, gamma + 1, rp))
            sorted_ok = bounds_ok = True
            for kind, c, lo, hi, rp in pending:
                good = isinstance(rp, RangeProof) and verify_range(c, lo, hi, rp)
                if kind == "sorted":
                    res.sortedness_checked += 1
                    sorted_ok &= good
                else:
                    res.bounds_checked += 1
                    bounds_ok &= good
            res.sorted_ok, res.bounds_ok = sorted_ok, bounds_ok
            if not sorted_ok:
                res.error = "sortedness-proof-invalid"
            elif not bounds_ok:
                res.error = "bound-proof-invalid"
        except VerificationError as exc:
            res.error = exc.reason
        except (TapError, TypeError, AttributeError, ValueError, IndexError) as exc:
            res.error = f"malformed: {type(exc).__name__}"
        return res

    def epoch_check(self, t_old: int, t_new: int, proof: AuditProof, *,
                    sample_fraction: float = 1.0, rng_seed: int = 0) -> AuditReport:
        report = AuditReport(t_old, t_new)
        try:
            d_old, d_new = self.bulletin.get(t_old), self.bulletin.get(t_new)
        except TapError as exc:
            report.failures.append(f"bulletin: {exc.code}")
            return report
        try:
            if not isinstance(proof, AuditProof):
                raise VerificationError("malformed", "not an audit proof")
            new_leaves = check_extension(self.layout, proof.extension, d_old, d_new, t_old, t_new)
            report.extension_ok = True
        except VerificationError as exc:
            report.failures.append(f"extension: {exc.reason}")
            return report
        except (TapError, TypeError, AttributeError, ValueError) as exc:
            report.failures.append(f"extension: malformed {type(exc).__name__}")
            return report
        buckets = tuple(getattr(proof, "buckets", ()))
        if len(buckets) != len(new_leaves):
            report.failures.append(f"bucket-count: {len(buckets)} audits for {len(new_leaves)} new buckets")
            return report
        report.total_buckets = len(new_leaves)
        indices = list(range(len(new_leaves)))
        if sample_fraction < 1.0:
            if not 0 < sample_fraction <= 1:
                raise ValueError("sample_fraction must be in (0, 1]")
            k = max(1, round(sample_fraction * len(indices))) if indices else 0
            indices = sorted(random.Random(rng_seed).sample(indices, k))
            report.sampled = len(indices)
        for i in indices:
            key, phi = new_leaves[i]
            report.buckets.append(self._check_bucket(key, phi, buckets[i]))
        return report

    def randomized_audit(self, t_old: int, t_new: int, proof: AuditProof, sample_fraction: float,
                         rng_seed: int) -> AuditReport:
        return self.epoch_check(t_old, t_new, proof, sample_fraction=sample_fraction, rng_seed=rng_seed)
