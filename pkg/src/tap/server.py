"""The data server: row store, prefix tree snapshots, digest publishing and
proof generation for every query type."""

from __future__ import annotations

import hashlib
import hmac
import secrets
import threading
from collections import OrderedDict
from fractions import Fraction
from typing import Iterable

from .bulletin import GENESIS_EPOCH, Bulletin
from .crypto.group import ORDER
from .crypto.hashing import id_hash, lp, u64
from .crypto.rangeproof import WIDTH, eq_bounds, forge_range, geq_bounds, leq_bounds, prove_range
from .errors import (BucketTooSmall, BulletinUnavailable, DuplicateUser, EmptyRange, EpochOutOfOrder,
                     GammaExceeded, InvalidQuantile, TapError, UnknownEpoch, ValueOutOfRange)
from .prefix_tree import PrefixTree, RangeSpec
from .proofs import (AggregateProof, AuditProof, BucketAbsenceProof, BucketAudit, LookupProof, MinMaxProof,
                     NonExistenceProof, QuantileProof, QuantileWitness, RootOpening, Witness)
from .schema import Schema
from .store import Row, RowStore
from .sum_tree import MAX_VALUE, Entry, SumTree


def quantile_ok(values_sorted: list[int], x: int, q: Fraction) -> bool:
    """x is a q-quantile: at least n*q values <= x and n*(1-q) values >= x."""
    n = len(values_sorted)
    le = sum(1 for v in values_sorted if v <= x)
    ge = sum(1 for v in values_sorted if v >= x)
    return le >= n * q and ge >= n * (1 - q)


def as_fraction(q) -> Fraction:
    try:
        q = Fraction(q) if not isinstance(q, float) else Fraction(str(q))
    except (ValueError, TypeError, ZeroDivisionError):
        raise InvalidQuantile(f"bad quantile {q!r}") from None
    if not 0 <= q <= 1:
        raise InvalidQuantile(f"quantile {q} outside [0, 1]")
    return q


def derive_seed(key: bytes, user_id: str, t: int) -> int:
    """Commitment randomness for one user and epoch, derived from the server key."""
    mac = hmac.new(key, lp(user_id.encode("utf-8")) + u64(t), hashlib.sha512).digest()
    return int.from_bytes(mac, "big") % ORDER


class TapServer:
    def __init__(self, schema: Schema, secret_key: bytes | None = None, bulletin: Bulletin | None = None,
                 store: RowStore | None = None, cache_size: int = 256):
        self.schema = schema
        self.layout = schema.layout
        self._key = secret_key if secret_key is not None else secrets.token_bytes(32)
        self.bulletin = bulletin if bulletin is not None else Bulletin()
        self.store = store if store is not None else RowStore()
        self._tree = PrefixTree(self.layout)
        self._snapshots: dict[int, PrefixTree] = {}
        self._epoch = GENESIS_EPOCH
        self._write_lock = threading.Lock()
        self._cache: OrderedDict = OrderedDict()
        self._cache_size = cache_size
        self._cache_lock = threading.Lock()
        self._initialize()

    # setup

    def _initialize(self) -> None:
        self._snapshots[GENESIS_EPOCH] = self._tree.copy()
        try:
            self.bulletin.publish(GENESIS_EPOCH, self._tree.digest())
        except OSError as exc:  # pragma: no cover - filesystem failure
            raise BulletinUnavailable(str(exc)) from None
        # replay persisted rows so a restarted server serves the same digests
        for t in self.store.epochs():
            for gap in range(self._epoch + 1, t):
                self._commit_epoch(gap, [])
            self._commit_epoch(t, self.store.epoch_rows(t))
        latest = self.bulletin.latest()
        for t in range(self._epoch + 1, latest.epoch + 1):
            self._commit_epoch(t, [])

    @property
    def epoch(self) -> int:
        return self._epoch

    def epoch_secret(self, user_id: str, t: int) -> int:
        return derive_seed(self._key, user_id, t)

    # insertion

    def _validate(self, t: int, rows) -> list[Row]:
        out, seen = [], set()
        for r in rows:
            if isinstance(r, Row):
                user, types, value = r.user_id, r.types, r.value
            elif isinstance(r, dict):
                user, types, value = r["user_id"], r.get("types", ()), r["value"]
            else:
                user, types, value = r
            codes = self.schema.codes(types)
            value = int(value)
            if user in seen:
                raise DuplicateUser(f"two rows for {user!r} at epoch {t}", user=user, epoch=t)
            seen.add(user)
            if not 0 <= value < MAX_VALUE:
                raise ValueOutOfRange(f"value {value} outside [0, 2^32)", user=user)
            if self.schema.gamma is not None and value > self.schema.gamma:
                raise GammaExceeded(f"value {value} exceeds bound {self.schema.gamma}", user=user)
            out.append(Row(t, user, codes, value, self.epoch_secret(user, t)))
        return out

    def build_bucket(self, rows: list[Row]) -> SumTree:
        return SumTree([Entry(r.value, r.seed, r.user_id, r.time) for r in rows], self.schema.z)

    def _commit_epoch(self, t: int, rows: list[Row]) -> bytes:
        buckets: dict[tuple, list[Row]] = {}
        for r in rows:
            buckets.setdefault(r.types, []).append(r)
        tree = self._tree.copy()
        for codes in sorted(buckets):
            st = self.build_bucket(buckets[codes])
            self._cache_put((t, codes), st)
            tree.insert(self.layout.encode(t, codes), st.root_hash)
        digest = tree.digest()
        self.bulletin.publish(t, digest)
        self._tree = tree
        self._snapshots[t] = tree.copy()
        self._epoch = t
        return digest

    def insert_epoch(self, t: int, rows: Iterable) -> bytes:
        with self._write_lock:
            if t != self._epoch + 1:
                raise EpochOutOfOrder(f"expected epoch {self._epoch + 1}, got {t}", epoch=t)
            validated = self._validate(t, rows)
            self.store.add_epoch(validated)
            return self._commit_epoch(t, validated)

    # snapshots and sum trees

    def digest(self, t: int | None = None) -> bytes:
        return self.snapshot(t).digest()

    def snapshot(self, t: int | None = None) -> PrefixTree:
        t = self._epoch if t is None else t
        snap = self._snapshots.get(t)
        if snap is None:
            raise UnknownEpoch(f"epoch {t} not published", epoch=t)
        return snap

    def _cache_put(self, key, tree: SumTree) -> None:
        with self._cache_lock:
            self._cache[key] = tree
            self._cache.move_to_end(key)
            while len(self._cache) > self._cache_size:
                self._cache.popitem(last=False)

    def sum_tree(self, t: int, codes: tuple) -> SumTree:
        key = (t, tuple(codes))
        with self._cache_lock:
            st = self._cache.get(key)
            if st is not None:
                self._cache.move_to_end(key)
                return st
        rows = self.store.bucket(t, tuple(codes))
        if not rows:
            raise EmptyRange(f"no bucket at {key}")
        st = self.build_bucket(rows)
        self._cache_put(key, st)
        return st

    def _covered(self, spec: RangeSpec, at: int | None):
        cover, leaves = self.snapshot(at).covered(spec)
        trees = []
        for key, _ in leaves:
            t, *codes = self.layout.decode(key)
            trees.append(self.sum_tree(t, tuple(codes)))
        return cover, trees

    # queries

    def lookup(self, user_id: str, types, t: int, at: int | None = None):
        at = self._epoch if at is None else at
        snap = self.snapshot(at)
        if t > at or t < 0:
            raise UnknownEpoch(f"epoch {t} not covered by snapshot {at}", epoch=t)
        codes = self.schema.codes(types)
        key = self.layout.encode(t, codes)
        if snap.get(key) is None:
            single = RangeSpec(t, t, tuple((c, c) for c in codes))
            return BucketAbsenceProof(snap.range_cover(single))
        st = self.sum_tree(t, codes)
        prefix = snap.inclusion_proof(key)
        idx = st.index_of(id_hash(user_id, t))
        if idx is None:
            return NonExistenceProof(prefix, tuple(st.leaves))
        return LookupProof(st.values[idx], prefix, st.inclusion_proof(idx))

    def query_aggregate(self, spec: RangeSpec, at: int | None = None) -> AggregateProof:
        cover, trees = self._covered(spec, at)
        if self.schema.min_bucket_size:
            for st in trees:
                if st.n < self.schema.min_bucket_size:
                    raise BucketTooSmall(f"bucket with {st.n} rows is below the policy minimum")
        z = self.schema.z
        sums = [0] * z
        seed = 0
        openings = []
        for st in trees:
            for j, s in enumerate(st.power_sums()):
                sums[j] += s
            seed += st.total_seed()
            openings.append(RootOpening(st.root_children(), st.root.commitments, st.root.count))
        return AggregateProof(cover, seed % ORDER, tuple(sums), tuple(openings))

    def query_minmax(self, spec: RangeSpec, mode: str, at: int | None = None,
                     claim: int | None = None) -> MinMaxProof:
        """``claim`` overrides the reported extreme; only useful to model a
        dishonest server in tests."""
        if mode not in ("min", "max"):
            raise ValueError("mode must be 'min' or 'max'")
        cover, trees = self._covered(spec, at)
        if not trees:
            raise EmptyRange("range covers no rows")
        idx = [0 if mode == "min" else st.n - 1 for st in trees]
        vals = [st.values[i] for st, i in zip(trees, idx)]
        v_star = (min(vals) if mode == "min" else max(vals)) if claim is None else claim
        star = next((k for k, v in enumerate(vals) if v == v_star), 0)
        witnesses = []
        for k, (st, i) in enumerate(zip(trees, idx)):
            if k == star:
                lo, hi = eq_bounds(v_star)
            elif mode == "min":
                lo, hi = geq_bounds(v_star)
            else:
                lo, hi = leq_bounds(v_star)
            witnesses.append(self._witness(st, i, lo, hi, honest=claim is None))
        return MinMaxProof(cover, v_star, star, tuple(witnesses))

    def _witness(self, st: SumTree, i: int, lo: int, hi: int, honest: bool = True) -> Witness:
        e = st.entries[i]
        c = st.leaves[i].commitments[0]
        prover = prove_range if honest else forge_range
        return Witness(st.inclusion_proof(i), prover(e.value, e.seed, lo, hi, commitment=c))

    def quantile_value(self, spec: RangeSpec, q, at: int | None = None) -> int:
        q = as_fraction(q)
        _, trees = self._covered(spec, at)
        values = sorted(v for st in trees for v in st.values)
        if not values:
            raise EmptyRange("range covers no rows")
        for x in reversed(values):
            if quantile_ok(values, x, q):
                return x
        raise TapError("no stored value satisfies the quantile")  # unreachable for n >= 1

    def query_quantile(self, spec: RangeSpec, q, at: int | None = None,
                       candidate: int | None = None) -> QuantileProof:
        """Prove the q-quantile. Returns the largest stored value that
        qualifies unless ``candidate`` names a different value to prove."""
        q = as_fraction(q)
        cover, trees = self._covered(spec, at)
        if not trees:
            raise EmptyRange("range covers no rows")
        v_star = self.quantile_value(spec, q, at) if candidate is None else candidate
        if not 0 <= v_star < MAX_VALUE:
            raise ValueOutOfRange(f"candidate {v_star} outside [0, 2^32)")
        witnesses = []
        for st in trees:
            i = st.leftmost_geq(v_star)
            j = st.rightmost_leq(v_star)
            left = self._witness(st, i, *geq_bounds(v_star)) if i is not None else None
            right = self._witness(st, j, *leq_bounds(v_star)) if j is not None else None
            witnesses.append(QuantileWitness(left, right))
        return QuantileProof(cover, v_star, tuple(witnesses))

    def audit_proof(self, t_old: int, t_new: int, *, honest: bool = True) -> AuditProof:
        if t_old > t_new:
            raise UnknownEpoch(f"epoch range ({t_old}, {t_new}] is reversed")
        self.snapshot(t_old)
        snap = self.snapshot(t_new)
        ext = snap.extension_proof(t_old, t_new)
        buckets = []
        gamma = self.schema.gamma
        for key, _ in snap.leaves_after(t_old):
            t, *codes = self.layout.decode(key)
            st = self.sum_tree(t, tuple(codes))
            prover = prove_range if honest else forge_range
            sorted_proofs = []
            for i in range(st.n - 1):
                a, b = st.entries[i], st.entries[i + 1]
                diff = st.leaves[i + 1].commitments[0] - st.leaves[i].commitments[0]
                sorted_proofs.append(prover(b.value - a.value, (b.seed - a.seed) % ORDER, 0, WIDTH, commitment=diff))
            bound_proofs = []
            if gamma is not None:
                for e, leaf in zip(st.entries, st.leaves):
                    bound_proofs.append(prover(e.value, e.seed, 0, gamma + 1, commitment=leaf.commitments[0]))
            buckets.append(BucketAudit(tuple(st.leaves), tuple(sorted_proofs), tuple(bound_proofs)))
        return AuditProof(ext, tuple(buckets))

    # plaintext helpers for oracles and benchmarks (never used by verifiers)

    def plaintext_values(self, spec: RangeSpec, at: int | None = None) -> list[int]:
        _, trees = self._covered(spec, at)
        return sorted(v for st in trees for v in st.values)


def initialize(schema: Schema, secret_key: bytes | None = None, bulletin: Bulletin | None = None,
               store: RowStore | None = None) -> TapServer:
    return TapServer(schema, secret_key, bulletin, store)


__all__ = ["TapServer", "initialize", "derive_seed", "quantile_ok", "as_fraction"]
