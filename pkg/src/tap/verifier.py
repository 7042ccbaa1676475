"""Client-side checks for every query proof.

Inputs are only the query, the proof, a published digest and, for lookups,
the client's own secrets. ``check_*`` functions raise VerificationError with
a machine-readable reason; ``verify_*`` wrappers return booleans.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

from .crypto.commitment import commit, commit_powers
from .crypto.group import ORDER, Point
from .crypto.hashing import EMPTY_SUM_HASH, id_hash
from .crypto.rangeproof import RangeProof, eq_bounds, geq_bounds, leq_bounds, verify_range
from .errors import TapError, VerificationError
from .prefix_tree import RangeSpec, check_range_cover
from .proofs import (AggregateProof, BucketAbsenceProof, LookupProof, MinMaxProof, NonExistenceProof,
                     QuantileProof, Witness)
from .schema import Schema
from .sum_tree import MAX_VALUE, SumInclusionProof, SumLeaf, fold_leaves, leaf_hash, node_hash
from .server import as_fraction


@dataclass(frozen=True)
class QueryResult:
    kind: str
    values: dict
    verified: bool = True


@dataclass(frozen=True)
class AggregateResult:
    count: int
    sums: tuple

    @property
    def total(self) -> int:
        return self.sums[0]

    @property
    def mean(self) -> Fraction:
        if not self.count:
            raise ZeroDivisionError("mean of an empty range")
        return Fraction(self.sums[0], self.count)

    @property
    def variance(self) -> Fraction:
        """Sample variance; needs z >= 2 and at least two rows."""
        if len(self.sums) < 2 or self.count < 2:
            raise ValueError("variance needs squared sums and two or more rows")
        n, s1, s2 = self.count, self.sums[0], self.sums[1]
        return (Fraction(s2) - Fraction(s1 * s1, n)) / (n - 1)

    @property
    def stddev(self) -> float:
        return math.sqrt(self.variance)


def _fail(reason: str, msg: str = "", **details):
    raise VerificationError(reason, msg, **details)


def _guard(fn):
    """Turn structural surprises in attacker-controlled input into rejections."""
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except VerificationError:
            raise
        except (TapError, TypeError, AttributeError, ValueError, IndexError, KeyError, OverflowError) as exc:
            raise VerificationError("malformed", f"{type(exc).__name__}: {exc}") from None
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _check_leaf_shape(leaf: SumLeaf, z: int) -> None:
    if not isinstance(leaf, SumLeaf) or len(leaf.commitments) != z:
        _fail("malformed", "leaf commitment count")
    if not all(isinstance(c, Point) for c in leaf.commitments) or len(leaf.id_hash) != 32:
        _fail("malformed", "leaf fields")


def _check_copath_shape(proof: SumInclusionProof, z: int) -> None:
    if not isinstance(proof, SumInclusionProof):
        _fail("malformed", "inclusion proof type")
    _check_leaf_shape(proof.leaf, z)
    for e in proof.copath:
        if len(e.commitments) != z or not all(isinstance(c, Point) for c in e.commitments):
            _fail("malformed", "co-path commitments")
        if not _is_int(e.count) or e.count < 0 or len(e.hash) != 32 or not isinstance(e.sibling_left, bool):
            _fail("malformed", "co-path entry")


def _is_empty_node(e) -> bool:
    return e.hash == EMPTY_SUM_HASH and e.count == 0 and all(c.is_identity() for c in e.commitments)


class Verifier:
    def __init__(self, schema: Schema):
        self.schema = schema
        self.layout = schema.layout
        self.z = schema.z

    # prefix-tree pieces

    def cover(self, spec: RangeSpec, cover, digest: bytes) -> list[tuple[int, bytes]]:
        return check_range_cover(self.layout, spec, cover, digest)

    def _prefix(self, proof, key: int, digest: bytes) -> bytes:
        if proof.key != key:
            _fail("prefix-key-mismatch")
        if len(proof.value) != 32:
            _fail("malformed", "prefix leaf value")
        if proof.root_hash(self.layout) != digest:
            _fail("prefix-digest-mismatch")
        return proof.value

    # lookups

    @_guard
    def check_lookup(self, proof: LookupProof, user_id: str, types, t: int, seed: int, digest: bytes,
                     expected_value: int | None = None) -> int:
        if not isinstance(proof, LookupProof):
            _fail("wrong-proof-kind")
        if not _is_int(proof.value) or not 0 <= proof.value < MAX_VALUE:
            _fail("malformed", "value out of domain")
        if expected_value is not None and proof.value != expected_value:
            _fail("value-mismatch", expected=expected_value, got=proof.value)
        key = self.layout.encode(t, self.schema.codes(types))
        phi = self._prefix(proof.prefix, key, digest)
        _check_copath_shape(proof.sum, self.z)
        leaf = proof.sum.leaf
        if leaf.id_hash != id_hash(user_id, t):
            _fail("identity-mismatch")
        if tuple(leaf.commitments) != tuple(commit_powers(proof.value, seed, self.z)):
            _fail("commitment-mismatch")
        if proof.sum.root().hash != phi:
            _fail("sum-root-mismatch")
        return proof.value

    def verify_lookup(self, *args, **kwargs) -> bool:
        try:
            self.check_lookup(*args, **kwargs)
            return True
        except VerificationError:
            return False

    @_guard
    def check_nonexistence(self, proof, user_id: str, types, t: int, digest: bytes) -> None:
        codes = self.schema.codes(types)
        key = self.layout.encode(t, codes)
        if isinstance(proof, BucketAbsenceProof):
            single = RangeSpec(t, t, tuple((c, c) for c in codes))
            if self.cover(single, proof.cover, digest):
                _fail("bucket-present")
            return
        if not isinstance(proof, NonExistenceProof):
            _fail("wrong-proof-kind")
        phi = self._prefix(proof.prefix, key, digest)
        if not proof.leaves:
            _fail("malformed", "no leaves")
        for leaf in proof.leaves:
            _check_leaf_shape(leaf, self.z)
        if fold_leaves(list(proof.leaves), self.z).hash != phi:
            _fail("sum-root-mismatch")
        own = id_hash(user_id, t)
        if any(leaf.id_hash == own for leaf in proof.leaves):
            _fail("identity-present")

    def verify_nonexistence(self, *args, **kwargs) -> bool:
        try:
            self.check_nonexistence(*args, **kwargs)
            return True
        except VerificationError:
            return False

    # aggregates

    @_guard
    def check_aggregate(self, spec: RangeSpec, proof: AggregateProof, digest: bytes) -> AggregateResult:
        if not isinstance(proof, AggregateProof):
            _fail("wrong-proof-kind")
        try:
            leaves = self.cover(spec, proof.cover, digest)
        except VerificationError as exc:
            raise VerificationError("cover-invalid", exc.reason) from None
        z = self.z
        if len(proof.sums) != z or not all(_is_int(s) and 0 <= s < ORDER for s in proof.sums):
            _fail("malformed", "sums")
        if not _is_int(proof.total_seed) or not 0 <= proof.total_seed < ORDER:
            _fail("malformed", "total seed")
        if len(proof.openings) != len(leaves):
            _fail("leaf-hash-mismatch", "opening count differs from covered leaves")
        totals = [Point.identity()] * z
        count = 0
        for (key, phi), op in zip(leaves, proof.openings):
            cs = tuple(op.commitments)
            if len(cs) != z or not all(isinstance(c, Point) for c in cs) or not _is_int(op.count):
                _fail("malformed", "opening")
            if len(op.children) == 64:
                if op.count < 2:
                    _fail("leaf-hash-mismatch", "internal root with fewer than two rows")
                h = node_hash(op.children, cs, op.count)
            elif len(op.children) == 32:
                if op.count != 1:
                    _fail("leaf-hash-mismatch", "single-leaf root must count one row")
                h = leaf_hash(cs, op.children)
            else:
                _fail("malformed", "opening children")
            if h != phi:
                _fail("leaf-hash-mismatch", key=key)
            totals = [a + b for a, b in zip(totals, cs)]
            count += op.count
        for j in range(z):
            if totals[j] != commit(proof.sums[j], proof.total_seed):
                _fail("sum-mismatch", power=j + 1)
        return AggregateResult(count, tuple(proof.sums))

    def verify_aggregate(self, *args, **kwargs) -> bool:
        try:
            self.check_aggregate(*args, **kwargs)
            return True
        except VerificationError:
            return False

    # order statistics

    def _witness_root(self, w: Witness, phi: bytes):
        if not isinstance(w, Witness) or not isinstance(w.range_proof, RangeProof):
            _fail("malformed", "witness")
        _check_copath_shape(w.inclusion, self.z)
        root = w.inclusion.root()
        if root.hash != phi:
            _fail("inclusion-invalid")
        if w.range_proof.commitment != w.inclusion.leaf.commitments[0]:
            _fail("range-commitment-mismatch")
        return root

    @_guard
    def check_minmax(self, spec: RangeSpec, proof: MinMaxProof, digest: bytes, mode: str) -> int:
        if mode not in ("min", "max") or not isinstance(proof, MinMaxProof):
            _fail("wrong-proof-kind")
        try:
            leaves = self.cover(spec, proof.cover, digest)
        except VerificationError as exc:
            raise VerificationError("cover-invalid", exc.reason) from None
        if not leaves:
            _fail("empty-range")
        v = proof.value
        if not _is_int(v) or not 0 <= v < MAX_VALUE:
            _fail("malformed", "value out of domain")
        if len(proof.witnesses) != len(leaves):
            _fail("witness-count-mismatch")
        star = proof.witness_index
        if not _is_int(star) or not 0 <= star < len(leaves):
            _fail("malformed", "witness index")
        checks = []
        for k, ((_, phi), w) in enumerate(zip(leaves, proof.witnesses)):
            self._witness_root(w, phi)
            copath = w.inclusion.copath
            if mode == "min":
                if any(e.sibling_left for e in copath):
                    _fail("not-extreme", "witness is not the leftmost leaf")
            elif any(not e.sibling_left and not _is_empty_node(e) for e in copath):
                _fail("not-extreme", "witness is not the rightmost leaf")
            if k == star:
                bounds = eq_bounds(v)
            else:
                bounds = geq_bounds(v) if mode == "min" else leq_bounds(v)
            checks.append((w.range_proof, bounds))
        for rp, (lo, hi) in checks:
            if not verify_range(rp.commitment, lo, hi, rp):
                _fail("range-proof-invalid")
        return v

    def verify_minmax(self, *args, **kwargs) -> bool:
        try:
            self.check_minmax(*args, **kwargs)
            return True
        except VerificationError:
            return False

    @_guard
    def check_quantile(self, spec: RangeSpec, q, proof: QuantileProof, digest: bytes) -> int:
        q = as_fraction(q)
        if not isinstance(proof, QuantileProof):
            _fail("wrong-proof-kind")
        try:
            leaves = self.cover(spec, proof.cover, digest)
        except VerificationError as exc:
            raise VerificationError("cover-invalid", exc.reason) from None
        if not leaves:
            _fail("empty-range")
        v = proof.value
        if not _is_int(v) or not 0 <= v < MAX_VALUE:
            _fail("malformed", "value out of domain")
        if len(proof.witnesses) != len(leaves):
            _fail("witness-count-mismatch")
        n = at_most = at_least = 0
        checks = []
        for (_, phi), qw in zip(leaves, proof.witnesses):
            if qw.at_least is None and qw.at_most is None:
                _fail("witness-missing")
            # a missing side is only allowed when the other witness sits at the bucket's edge
            if qw.at_least is None and qw.at_most.inclusion.right_count() != 0:
                _fail("witness-missing", "no value >= v* claimed but the witness is not the last leaf")
            if qw.at_most is None and qw.at_least.inclusion.left_count() != 0:
                _fail("witness-missing", "no value <= v* claimed but the witness is not the first leaf")
            root_count = None
            if qw.at_least is not None:
                root = self._witness_root(qw.at_least, phi)
                root_count = root.count
                at_least += qw.at_least.inclusion.right_count() + 1
                checks.append((qw.at_least.range_proof, geq_bounds(v)))
            if qw.at_most is not None:
                root = self._witness_root(qw.at_most, phi)
                root_count = root.count
                at_most += qw.at_most.inclusion.left_count() + 1
                checks.append((qw.at_most.range_proof, leq_bounds(v)))
            n += root_count
        if at_most < n * q:
            _fail("quantile-count", f"{at_most} values <= {v}, need {n * q}")
        if at_least < n * (1 - q):
            _fail("quantile-count", f"{at_least} values >= {v}, need {n * (1 - q)}")
        for rp, (lo, hi) in checks:
            if not verify_range(rp.commitment, lo, hi, rp):
                _fail("range-proof-invalid")
        return v

    def verify_quantile(self, *args, **kwargs) -> bool:
        try:
            self.check_quantile(*args, **kwargs)
            return True
        except VerificationError:
            return False


# monitoring

@dataclass
class MonitorFinding:
    epoch: int
    status: str  # ok | missing | mismatch | absent-ok | invalid-proof | unexpected-presence
    detail: str = ""


@dataclass
class MonitorReport:
    user_id: str
    findings: list = field(default_factory=list)

    @property
    def clean(self) -> bool:
        return all(f.status in ("ok", "absent-ok") for f in self.findings)

    def lines(self) -> list[str]:
        return [f"epoch={f.epoch} status={f.status}" + (f" detail={f.detail}" if f.detail else "")
                for f in self.findings]


def monitor(verifier: Verifier, fetch: Callable[[int], object], digest_of: Callable[[int], bytes],
            user_id: str, types, expected: dict, seeds: dict) -> MonitorReport:
    """Check one lookup per epoch. ``expected`` maps epoch -> value, or None
    where the user submitted nothing; ``seeds`` maps epoch -> seed."""
    report = MonitorReport(user_id)
    for t in sorted(expected):
        want = expected[t]
        try:
            proof = fetch(t)
            digest = digest_of(t)
        except TapError as exc:
            report.findings.append(MonitorFinding(t, "invalid-proof", exc.code))
            continue
        if isinstance(proof, LookupProof):
            try:
                got = verifier.check_lookup(proof, user_id, types, t, seeds.get(t, 0), digest)
            except VerificationError as exc:
                report.findings.append(MonitorFinding(t, "invalid-proof", exc.reason))
                continue
            if want is None:
                report.findings.append(MonitorFinding(t, "unexpected-presence", f"value={got}"))
            elif got != want:
                report.findings.append(MonitorFinding(t, "mismatch", f"expected={want} got={got}"))
            else:
                report.findings.append(MonitorFinding(t, "ok"))
        else:
            try:
                verifier.check_nonexistence(proof, user_id, types, t, digest)
            except VerificationError as exc:
                report.findings.append(MonitorFinding(t, "invalid-proof", exc.reason))
                continue
            report.findings.append(MonitorFinding(t, "missing" if want is not None else "absent-ok"))
    return report
