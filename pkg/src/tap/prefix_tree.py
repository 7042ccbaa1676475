"""Chronological Merkle prefix tree.

Keys are fixed-width bit strings: the time attribute first, then one field
per type attribute. The trie is uncompressed, so every leaf sits at full key
depth, and nodes are immutable: inserting copies the root-to-leaf path and
leaves older roots intact as snapshots.

Hashes:
    leaf      H(0x02 | last-bit | value)
    internal  H(0x03 | last-bit | left | right)   (the root has no last-bit)
Absent children hash to 32 zero bytes.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Callable, Iterator

from .crypto.hashing import TAG_PREFIX_LEAF, TAG_PREFIX_NODE, ZERO_DIGEST, hash_bytes
from .errors import DuplicateKey, KeyAbsent, TimeRegression, VerificationError

_BIT = (b"\x00", b"\x01")


def prefix_leaf_hash(last_bit: bytes, value: bytes) -> bytes:
    return hash_bytes(TAG_PREFIX_LEAF, last_bit, value)


def prefix_node_hash(last_bit: bytes, left: bytes, right: bytes) -> bytes:
    return hash_bytes(TAG_PREFIX_NODE, last_bit, left, right)


EMPTY_TREE_DIGEST = prefix_node_hash(b"", ZERO_DIGEST, ZERO_DIGEST)


@dataclass(frozen=True)
class KeyLayout:
    """Bit widths of the key fields, time first."""

    widths: tuple

    def __post_init__(self):
        if not self.widths or any(w <= 0 for w in self.widths):
            raise ValueError("key fields need positive widths")

    @property
    def bits(self) -> int:
        return sum(self.widths)

    @property
    def time_bits(self) -> int:
        return self.widths[0]

    def encode(self, time: int, codes=()) -> int:
        fields = (time, *codes)
        if len(fields) != len(self.widths):
            raise ValueError(f"expected {len(self.widths) - 1} type codes, got {len(codes)}")
        key = 0
        for value, w in zip(fields, self.widths):
            if not 0 <= value < (1 << w):
                raise ValueError(f"field value {value} does not fit in {w} bits")
            key = (key << w) | value
        return key

    def decode(self, key: int) -> tuple:
        out = []
        for w in reversed(self.widths):
            out.append(key & ((1 << w) - 1))
            key >>= w
        return tuple(reversed(out))

    def time_of(self, key: int) -> int:
        return key >> (self.bits - self.time_bits)

    def reachable(self, prefix: int, depth: int):
        """Per field, the closed interval of values still reachable below a
        node whose path from the root spells ``prefix`` (``depth`` bits)."""
        start = 0
        for w in self.widths:
            end = start + w
            if depth <= start:
                yield 0, (1 << w) - 1
            elif depth >= end:
                yield (prefix >> (depth - end)) & ((1 << w) - 1), (prefix >> (depth - end)) & ((1 << w) - 1)
            else:
                fixed = prefix & ((1 << (depth - start)) - 1)
                rem = end - depth
                yield fixed << rem, ((fixed + 1) << rem) - 1
            start = end


@dataclass(frozen=True)
class RangeSpec:
    """Closed intervals: [t_min, t_max] on time and one (lo, hi) per type."""

    t_min: int
    t_max: int
    types: tuple = ()

    def bounds(self) -> tuple:
        return ((self.t_min, self.t_max), *self.types)

    def overlaps(self, layout: KeyLayout, prefix: int, depth: int) -> bool:
        bounds = self.bounds()
        if len(bounds) != len(layout.widths):
            return False
        for (lo, hi), (a, b) in zip(bounds, layout.reachable(prefix, depth)):
            if lo > hi or b < lo or a > hi:
                return False
        return True

    def contains(self, layout: KeyLayout, key: int) -> bool:
        return self.overlaps(layout, key, layout.bits)

    @classmethod
    def everything(cls, layout: KeyLayout) -> "RangeSpec":
        full = tuple((0, (1 << w) - 1) for w in layout.widths[1:])
        return cls(0, (1 << layout.time_bits) - 1, full)


class _Node:
    __slots__ = ("hash", "left", "right", "value")

    def __init__(self, hash_, left=None, right=None, value=None):
        self.hash = hash_
        self.left = left
        self.right = right
        self.value = value


def _h(node) -> bytes:
    return node.hash if node is not None else ZERO_DIGEST


@dataclass(frozen=True)
class PrefixInclusionProof:
    key: int
    value: bytes
    siblings: tuple  # top-down; None marks an absent sibling

    def root_hash(self, layout: KeyLayout) -> bytes:
        n = layout.bits
        if len(self.siblings) != n:
            raise VerificationError("prefix-path-length")
        bits = [(self.key >> (n - 1 - d)) & 1 for d in range(n)]
        cur = prefix_leaf_hash(_BIT[bits[-1]], self.value)
        for d in range(n - 1, -1, -1):
            sib = self.siblings[d]
            if sib is not None and (len(sib) != 32 or sib == ZERO_DIGEST):
                raise VerificationError("prefix-sibling-malformed")
            sib = sib if sib is not None else ZERO_DIGEST
            pair = (sib, cur) if bits[d] else (cur, sib)
            last = _BIT[bits[d - 1]] if d > 0 else b""
            cur = prefix_node_hash(last, *pair)
        return cur


def verify_prefix_inclusion(layout: KeyLayout, proof: PrefixInclusionProof, digest: bytes) -> bool:
    try:
        return proof.root_hash(layout) == digest
    except (VerificationError, TypeError, AttributeError):
        return False


class CoverKind(IntEnum):
    INNER = 0
    LEAF = 1
    PRUNED = 2
    EMPTY = 3


@dataclass(frozen=True)
class CoverEntry:
    kind: int
    data: bytes = b""


@dataclass(frozen=True)
class RangeCoverProof:
    """Preorder, left-to-right walk over the nodes overlapping a range.

    Included inner nodes are expanded, included leaves reveal their value,
    non-overlapping subtrees appear as a bare hash. Key fragments are implied
    by position, so they are not transmitted.
    """

    entries: tuple


@dataclass(frozen=True)
class ExtensionProof:
    t_old: int
    t_new: int
    cover: RangeCoverProof


class PrefixTree:
    def __init__(self, layout: KeyLayout):
        self.layout = layout
        self._root = _Node(EMPTY_TREE_DIGEST)
        self._max_time = None
        self._size = 0

    def copy(self) -> "PrefixTree":
        """O(1) snapshot; nodes are shared and never mutated."""
        t = PrefixTree.__new__(PrefixTree)
        t.layout, t._root, t._max_time, t._size = self.layout, self._root, self._max_time, self._size
        return t

    def __len__(self) -> int:
        return self._size

    @property
    def max_time(self):
        return self._max_time

    def digest(self) -> bytes:
        return self._root.hash

    def insert(self, key: int, value: bytes) -> None:
        L = self.layout
        if not 0 <= key < (1 << L.bits):
            raise ValueError("key out of range")
        if len(value) != 32:
            raise ValueError("leaf value must be a 32-byte digest")
        t = L.time_of(key)
        if self._max_time is not None and t < self._max_time:
            raise TimeRegression(f"time {t} precedes {self._max_time}")
        n = L.bits
        bits = [(key >> (n - 1 - d)) & 1 for d in range(n)]

        path = [self._root]
        node = self._root
        for d in range(n):
            node = (node.right if bits[d] else node.left) if node is not None else None
            path.append(node)
        if path[-1] is not None:
            raise DuplicateKey(f"key {key:#x} already present")

        new = _Node(prefix_leaf_hash(_BIT[bits[-1]], value), value=value)
        for d in range(n - 1, -1, -1):
            old = path[d]
            left, right = (old.left, old.right) if old is not None else (None, None)
            if bits[d]:
                right = new
            else:
                left = new
            last = _BIT[bits[d - 1]] if d > 0 else b""
            new = _Node(prefix_node_hash(last, _h(left), _h(right)), left, right)
        self._root = new
        self._max_time = t
        self._size += 1

    def get(self, key: int) -> bytes | None:
        n = self.layout.bits
        node = self._root
        for d in range(n):
            node = node.right if (key >> (n - 1 - d)) & 1 else node.left
            if node is None:
                return None
        return node.value

    def items(self) -> Iterator[tuple[int, bytes]]:
        def walk(node, prefix, depth):
            if node is None:
                return
            if depth == self.layout.bits:
                yield prefix, node.value
                return
            yield from walk(node.left, prefix << 1, depth + 1)
            yield from walk(node.right, (prefix << 1) | 1, depth + 1)
        yield from walk(self._root, 0, 0)

    def node_count(self) -> int:
        def count(node):
            return 0 if node is None else 1 + count(node.left) + count(node.right)
        return count(self._root)

    def inclusion_proof(self, key: int) -> PrefixInclusionProof:
        n = self.layout.bits
        siblings = []
        node = self._root
        for d in range(n):
            if node is None:
                raise KeyAbsent(f"key {key:#x} not present")
            bit = (key >> (n - 1 - d)) & 1
            sib = node.left if bit else node.right
            siblings.append(sib.hash if sib is not None else None)
            node = node.right if bit else node.left
        if node is None:
            raise KeyAbsent(f"key {key:#x} not present")
        return PrefixInclusionProof(key, node.value, tuple(siblings))

    def _cover(self, overlaps: Callable[[int, int], bool]) -> tuple[RangeCoverProof, list]:
        out, leaves = [], []
        n = self.layout.bits

        def walk(node, prefix, depth):
            if node is None:
                out.append(CoverEntry(CoverKind.EMPTY))
            elif not overlaps(prefix, depth):
                out.append(CoverEntry(CoverKind.PRUNED, node.hash))
            elif depth == n:
                out.append(CoverEntry(CoverKind.LEAF, node.value))
                leaves.append((prefix, node.value))
            else:
                out.append(CoverEntry(CoverKind.INNER))
                walk(node.left, prefix << 1, depth + 1)
                walk(node.right, (prefix << 1) | 1, depth + 1)

        walk(self._root, 0, 0)
        return RangeCoverProof(tuple(out)), leaves

    def range_cover(self, spec: RangeSpec) -> RangeCoverProof:
        return self._cover(lambda p, d: spec.overlaps(self.layout, p, d))[0]

    def covered(self, spec: RangeSpec) -> tuple[RangeCoverProof, list[tuple[int, bytes]]]:
        """The cover proof together with the (key, value) leaves it reveals."""
        return self._cover(lambda p, d: spec.overlaps(self.layout, p, d))

    def leaves_in(self, spec: RangeSpec) -> list[tuple[int, bytes]]:
        return self.covered(spec)[1]

    def leaves_after(self, t_old: int) -> list[tuple[int, bytes]]:
        return self._cover(_time_window(self.layout, t_old + 1))[1]

    def extension_proof(self, t_old: int, t_new: int) -> ExtensionProof:
        """Proof that this tree (the snapshot at ``t_new``) extends the
        snapshot at ``t_old`` only by leaves with time in (t_old, t_new]."""
        if t_old == t_new:
            return ExtensionProof(t_old, t_new, RangeCoverProof((CoverEntry(CoverKind.PRUNED, self.digest()),)))
        window = _time_window(self.layout, t_old + 1)
        return ExtensionProof(t_old, t_new, self._cover(window)[0])


def _time_window(layout: KeyLayout, t_from: int):
    spec = RangeSpec(max(t_from, 0), (1 << layout.time_bits) - 1,
                     tuple((0, (1 << w) - 1) for w in layout.widths[1:]))
    return lambda p, d: spec.overlaps(layout, p, d)


class _CoverReader:
    """Replays a cover walk, rebuilding the hash of the tree it describes
    and, optionally, of the same tree with every revealed leaf removed."""

    def __init__(self, layout: KeyLayout, entries, overlaps):
        self.layout = layout
        self.entries = entries
        self.overlaps = overlaps
        self.pos = 0
        self.leaves: list[tuple[int, bytes]] = []

    def _next(self) -> CoverEntry:
        if self.pos >= len(self.entries):
            raise VerificationError("cover-truncated")
        e = self.entries[self.pos]
        self.pos += 1
        return e

    def walk(self, prefix: int, depth: int) -> tuple[bytes, bytes]:
        """Return (hash with revealed leaves, hash without them)."""
        n = self.layout.bits
        last = _BIT[prefix & 1] if depth > 0 else b""
        e = self._next()
        kind, data = e.kind, e.data
        if kind == CoverKind.EMPTY:
            if depth == 0 or data:
                raise VerificationError("cover-malformed")
            return ZERO_DIGEST, ZERO_DIGEST
        if kind == CoverKind.PRUNED:
            if len(data) != 32 or data == ZERO_DIGEST:
                raise VerificationError("cover-malformed")
            if self.overlaps(prefix, depth):
                raise VerificationError("cover-incomplete", f"pruned node at depth {depth} overlaps the range")
            return data, data
        if not self.overlaps(prefix, depth):
            raise VerificationError("cover-overreach", f"node at depth {depth} lies outside the range")
        if kind == CoverKind.LEAF:
            if depth != n or len(data) != 32:
                raise VerificationError("cover-malformed")
            self.leaves.append((prefix, data))
            return prefix_leaf_hash(last, data), ZERO_DIGEST
        if kind == CoverKind.INNER:
            if depth == n or data:
                raise VerificationError("cover-malformed")
            ln, lo = self.walk(prefix << 1, depth + 1)
            rn, ro = self.walk((prefix << 1) | 1, depth + 1)
            new = prefix_node_hash(last, ln, rn)
            if depth > 0 and lo == ZERO_DIGEST and ro == ZERO_DIGEST:
                old = ZERO_DIGEST
            else:
                old = prefix_node_hash(last, lo, ro)
            return new, old
        raise VerificationError("cover-malformed", f"unknown entry kind {kind!r}")

    def run(self) -> tuple[bytes, bytes]:
        new, old = self.walk(0, 0)
        if self.pos != len(self.entries):
            raise VerificationError("cover-malformed", "trailing entries")
        return new, old


def check_range_cover(layout: KeyLayout, spec: RangeSpec, proof: RangeCoverProof,
                      digest: bytes) -> list[tuple[int, bytes]]:
    """Validate a cover and return the revealed (key, value) leaves.
    Raises VerificationError on any failure."""
    try:
        reader = _CoverReader(layout, tuple(proof.entries), lambda p, d: spec.overlaps(layout, p, d))
        root, _ = reader.run()
    except VerificationError:
        raise
    except (TypeError, AttributeError, ValueError) as exc:
        raise VerificationError("cover-malformed", str(exc)) from None
    if root != digest:
        raise VerificationError("cover-digest-mismatch")
    return reader.leaves


def verify_range_cover(layout: KeyLayout, spec: RangeSpec, proof: RangeCoverProof, digest: bytes) -> bool:
    try:
        check_range_cover(layout, spec, proof, digest)
        return True
    except VerificationError:
        return False


def check_extension(layout: KeyLayout, proof: ExtensionProof, digest_old: bytes, digest_new: bytes,
                    t_old: int, t_new: int) -> list[tuple[int, bytes]]:
    """Validate an append-only extension and return the new leaves."""
    if proof.t_old != t_old or proof.t_new != t_new or t_new < t_old:
        raise VerificationError("extension-epochs-mismatch")
    try:
        entries = tuple(proof.cover.entries)
        if t_old == t_new:
            if len(entries) != 1 or entries[0].kind != CoverKind.PRUNED or entries[0].data != digest_new:
                raise VerificationError("extension-new-digest-mismatch")
            if digest_old != digest_new:
                raise VerificationError("extension-old-digest-mismatch")
            return []
        reader = _CoverReader(layout, entries, _time_window(layout, t_old + 1))
        new, old = reader.run()
    except VerificationError:
        raise
    except (TypeError, AttributeError, ValueError) as exc:
        raise VerificationError("extension-malformed", str(exc)) from None
    if new != digest_new:
        raise VerificationError("extension-new-digest-mismatch")
    if old != digest_old:
        raise VerificationError("extension-old-digest-mismatch")
    for key, _ in reader.leaves:
        if not t_old < layout.time_of(key) <= t_new:
            raise VerificationError("extension-leaf-time",
                                    f"leaf time {layout.time_of(key)} outside ({t_old}, {t_new}]")
    return reader.leaves


def verify_extension(layout: KeyLayout, proof: ExtensionProof, digest_old: bytes, digest_new: bytes,
                     t_old: int, t_new: int) -> bool:
    try:
        check_extension(layout, proof, digest_old, digest_new, t_old, t_new)
        return True
    except VerificationError:
        return False
