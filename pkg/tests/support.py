"""Shared fixtures and the single-field proof mutator used by the soundness tests."""

from __future__ import annotations

import dataclasses
import random
from pathlib import Path

from tap import wire
from tap.auditor import Auditor
from tap.crypto.group import Point, random_scalar
from tap.errors import TapError, VerificationError
from tap.prefix_tree import RangeSpec, check_extension
from tap.schema import Schema, TypeAttribute
from tap.server import TapServer
from tap.sum_tree import Entry, SumTree
from tap.verifier import Verifier

FIXTURES = Path(__file__).parent / "fixtures"

# Illustrative rows: (time, user, type, value)
TABLE2 = [
    (0, "Alice", "residential", 11),
    (0, "Bob", "residential", 24),
    (0, "Carol", "residential", 13),
    (1, "Alice", "residential", 19),
    (1, "Bob", "residential", 26),
    (1, "Carol", "residential", 27),
    (1, "Dave", "residential", 26),
    (1, "Erin", "industrial", 36),
]

KEY = b"fixture-secret-key-0123456789abc"


def table2_schema(z: int = 2, **kw) -> Schema:
    return Schema((TypeAttribute("Type", {"residential": 0, "industrial": 1}),), z=z, **kw)


def table2_server(schema: Schema | None = None, server_cls=TapServer, **kw) -> TapServer:
    schema = schema or table2_schema()
    server = server_cls(schema, KEY, **kw)
    for t in (0, 1):
        server.insert_epoch(t, [(u, (ty,), v) for tt, u, ty, v in TABLE2 if tt == t])
    return server


def two_epochs(server_cls) -> TapServer:
    return table2_server(server_cls=server_cls)


def full_spec(schema: Schema) -> RangeSpec:
    return RangeSpec.everything(schema.layout)


def brute_quantiles(values, q) -> set[int]:
    """Every integer x satisfying the q-quantile definition, found by scanning."""
    n = len(values)
    out = set()
    for x in range(min(values) - 1, max(values) + 2):
        if sum(v <= x for v in values) >= n * q and sum(v >= x for v in values) >= n * (1 - q):
            out.add(x)
    return out


# servers that misbehave in the ways an audit must catch

class HistoryRewriter(TapServer):
    """Rewrites Bob's epoch-0 reading while committing epoch 1."""

    def _commit_epoch(self, t, rows):
        if t == 1:
            bucket = [r for r in self.store.epoch_rows(0)]
            bob = next(r for r in bucket if r.user_id == "Bob")
            forged = [type(r)(r.time, r.user_id, r.types, 25 if r is bob else r.value, r.seed) for r in bucket]
            st = self.build_bucket(forged)
            self._cache_put((0, forged[0].types), st)
            tree = type(self._tree)(self.layout)
            tree.insert(self.layout.encode(0, forged[0].types), st.root_hash)
            self._tree = tree
        return super()._commit_epoch(t, rows)


class OrderSwapper(TapServer):
    """Swaps two leaves of the epoch-0 bucket while committing epoch 1."""

    def _commit_epoch(self, t, rows):
        if t == 1:
            bucket = self.store.epoch_rows(0)
            honest = self.build_bucket(bucket)
            order = list(honest.entries)
            order[0], order[1] = order[1], order[0]
            st = SumTree(order, self.schema.z, presorted=True)
            self._cache_put((0, bucket[0].types), st)
            tree = type(self._tree)(self.layout)
            tree.insert(self.layout.encode(0, bucket[0].types), st.root_hash)
            self._tree = tree
        return super()._commit_epoch(t, rows)


class UnsortedServer(TapServer):
    """Commits each bucket in submission order and never sorts it."""

    def build_bucket(self, rows):
        return SumTree([Entry(r.value, r.seed, r.user_id, r.time) for r in rows], self.schema.z, presorted=True)


# single-field mutation

def _children(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return [(f.name, getattr(obj, f.name)) for f in dataclasses.fields(obj)]
    if isinstance(obj, tuple):
        return list(enumerate(obj))
    return []


def field_paths(obj, path=(), under=None):
    """Paths to every field and sequence element in a proof tree. ``under``
    restricts the result to paths that start with the given prefix."""
    out = []
    if path and (under is None or path[:len(under)] == under):
        out.append(path)
    for key, child in _children(obj):
        out.extend(field_paths(child, path + (key,), under))
    return out


def _get(obj, path):
    for key in path:
        obj = obj[key] if isinstance(obj, tuple) else getattr(obj, key)
    return obj


def _set(obj, path, value):
    if not path:
        return value
    key, rest = path[0], path[1:]
    if isinstance(obj, tuple):
        items = list(obj)
        items[key] = _set(obj[key], rest, value)
        return tuple(items)
    new_child = _set(getattr(obj, key), rest, value)
    # bypass __init__ so the mutated object reaches the decoder and verifier intact
    clone = object.__new__(type(obj))
    for f in dataclasses.fields(obj):
        object.__setattr__(clone, f.name, getattr(obj, f.name))
    object.__setattr__(clone, key, new_child)
    return clone


def _mutate_value(x, rng: random.Random):
    if isinstance(x, bool):
        return not x
    if isinstance(x, int):
        choice = rng.randrange(5)
        if choice == 0:
            return x + 1
        if choice == 1:
            return x - 1
        if choice == 2:
            return x + rng.randrange(2, 1 << 16)
        if choice == 3:
            return rng.randrange(0, 1 << 32)
        return -x - 1
    if isinstance(x, (bytes, bytearray)):
        x = bytes(x)
        choice = rng.randrange(4)
        if x and choice < 2:
            i = rng.randrange(len(x))
            return x[:i] + bytes([x[i] ^ (1 << rng.randrange(8))]) + x[i + 1:]
        if x and choice == 2:
            return x[:-1]
        return x + b"\x00"
    if isinstance(x, str):
        return x + "x"
    if isinstance(x, Point):
        choice = rng.randrange(3)
        if choice == 0:
            return Point.base_mul(random_scalar())
        if choice == 1:
            return x + Point.base_mul(1)
        return Point.identity() if not x.is_identity() else Point.base_mul(2)
    if x is None:
        return rng.choice([0, b"", ()])
    if isinstance(x, tuple):
        choice = rng.randrange(4)
        if x and choice == 0:
            i = rng.randrange(len(x))
            return x[:i] + x[i + 1:]
        if x and choice == 1:
            i = rng.randrange(len(x))
            return x[:i + 1] + x[i:]
        if len(x) >= 2 and choice == 2:
            i, j = rng.sample(range(len(x)), 2)
            items = list(x)
            items[i], items[j] = items[j], items[i]
            return tuple(items)
        return ()
    # a nested message: swap in a different field's value
    return None


def mutate(proof, rng: random.Random, under=None, attempts: int = 100):
    """Change exactly one field or sequence of ``proof``; never returns a
    mutant whose canonical encoding equals the original."""
    paths = field_paths(proof, under=under)
    original = wire.encode(proof)
    for _ in range(attempts):
        path = rng.choice(paths)
        new = _mutate_value(_get(proof, path), rng)
        mutant = _set(proof, path, new)
        try:
            if wire.encode(mutant) == original:
                continue
        except (TypeError, ValueError):
            pass  # unencodable mutants are still distinct from the original
        return path, mutant
    raise RuntimeError("could not find a distinguishing mutation")


def accepted_after_wire(mutant, verify) -> bool:
    """Deliver the mutant as the canonical encoding would, then verify."""
    try:
        data = wire.encode(mutant)
        received = wire.decode(data)
    except (TapError, TypeError, ValueError, OverflowError):
        return False
    try:
        return bool(verify(received))
    except (VerificationError, TapError):
        return False


def proof_cases(server: TapServer):
    """(name, proof, verify-callable, path prefix) for every proof type on the fixture."""
    schema = server.schema
    v = Verifier(schema)
    d1 = server.bulletin.get(1)
    full = full_spec(schema)
    e0 = RangeSpec(0, 0, ((0, 255),))
    res = ("residential",)
    seed_bob = server.epoch_secret("Bob", 0)
    auditor = Auditor(schema, server.bulletin)
    d_old, d_new = server.bulletin.get(-1), server.bulletin.get(1)

    def audit_ok(p):
        return auditor.epoch_check(-1, 1, p).ok

    return [
        ("lookup", server.lookup("Bob", res, 0),
         lambda p: v.check_lookup(p, "Bob", res, 0, seed_bob, d1) == 24, None),
        ("non-existence", server.lookup("Dave", res, 0),
         lambda p: v.check_nonexistence(p, "Dave", res, 0, d1) is None, None),
        ("bucket-absence", server.lookup("Erin", ("industrial",), 0),
         lambda p: v.check_nonexistence(p, "Erin", ("industrial",), 0, d1) is None, None),
        ("aggregate", server.query_aggregate(full),
         lambda p: v.check_aggregate(full, p, d1) is not None, None),
        ("min", server.query_minmax(e0, "min"),
         lambda p: v.check_minmax(e0, p, d1, "min") is not None, None),
        ("max", server.query_minmax(full, "max"),
         lambda p: v.check_minmax(full, p, d1, "max") is not None, None),
        ("quantile", server.query_quantile(full, "1/2"),
         lambda p: v.check_quantile(full, "1/2", p, d1) is not None, None),
        ("extension", server.snapshot(1).extension_proof(-1, 1),
         lambda p: check_extension(schema.layout, p, d_old, d_new, -1, 1) is not None, None),
        ("sortedness", server.audit_proof(-1, 1), audit_ok, ("buckets",)),
    ]
