"""Value-sorted Merkle sum tree over one bucket.

Leaves hold commitments to v, v^2, ..., v^z under one seed plus an identity
hash. Internal nodes hold the homomorphic sums of their children's
commitments and the number of leaves below them, and both are hashed in, so a
co-path authenticates how many leaves sit on either side of a proven leaf.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass

from .crypto.commitment import commit_powers
from .crypto.group import ORDER, Point
from .crypto.hashing import EMPTY_SUM_HASH, TAG_SUM_LEAF, TAG_SUM_NODE, hash_bytes, id_hash, u64
from .errors import EmptyBucket, IndexOutOfBounds, ValueOutOfRange

MAX_VALUE = 2**32
MAX_POWERS = 4


def leaf_hash(commitments, ident: bytes) -> bytes:
    return hash_bytes(TAG_SUM_LEAF, *(bytes(c) for c in commitments), ident)


def node_hash(children: bytes, commitments, count: int) -> bytes:
    """``children`` is the 64-byte concatenation of left and right hashes."""
    return hash_bytes(TAG_SUM_NODE, children, *(bytes(c) for c in commitments), u64(count))


@dataclass(frozen=True)
class SumNode:
    hash: bytes
    commitments: tuple
    count: int

    @staticmethod
    def empty(z: int) -> "SumNode":
        return SumNode(EMPTY_SUM_HASH, (Point.identity(),) * z, 0)


def combine(left: SumNode, right: SumNode) -> SumNode:
    cs = tuple(a + b for a, b in zip(left.commitments, right.commitments))
    count = left.count + right.count
    return SumNode(node_hash(left.hash + right.hash, cs, count), cs, count)


@dataclass(frozen=True)
class SumLeaf:
    commitments: tuple
    id_hash: bytes

    @property
    def hash(self) -> bytes:
        return leaf_hash(self.commitments, self.id_hash)

    def node(self) -> SumNode:
        return SumNode(self.hash, tuple(self.commitments), 1)


@dataclass(frozen=True)
class CopathEntry:
    hash: bytes
    commitments: tuple
    count: int
    sibling_left: bool


@dataclass(frozen=True)
class SumInclusionProof:
    leaf: SumLeaf
    copath: tuple

    def root(self) -> SumNode:
        cur = self.leaf.node()
        for e in self.copath:
            sib = SumNode(e.hash, tuple(e.commitments), e.count)
            cur = combine(sib, cur) if e.sibling_left else combine(cur, sib)
        return cur

    def left_count(self) -> int:
        return sum(e.count for e in self.copath if e.sibling_left)

    def right_count(self) -> int:
        return sum(e.count for e in self.copath if not e.sibling_left)


def build_levels(nodes: list[SumNode], z: int) -> list[list[SumNode]]:
    """Left-complete tree: pair neighbours level by level, padding an odd
    tail with the empty node."""
    levels = [list(nodes)]
    empty = SumNode.empty(z)
    while len(levels[-1]) > 1:
        prev = levels[-1]
        if len(prev) % 2:
            prev = prev + [empty]
        levels.append([combine(prev[i], prev[i + 1]) for i in range(0, len(prev), 2)])
    return levels


def fold_leaves(leaves, z: int) -> SumNode:
    """Root of the tree over ``leaves`` in the given order."""
    if not leaves:
        raise EmptyBucket("no leaves")
    return build_levels([leaf.node() for leaf in leaves], z)[-1][0]


@dataclass(frozen=True)
class Entry:
    value: int
    seed: int
    user_id: str
    time: int


class SumTree:
    """Immutable after construction. ``entries`` may be in any order."""

    def __init__(self, entries, z: int = 2, *, presorted: bool = False):
        entries = [e if isinstance(e, Entry) else Entry(*e) for e in entries]
        if not entries:
            raise EmptyBucket("bucket has no rows")
        if not 1 <= z <= MAX_POWERS:
            raise ValueError(f"z must be in 1..{MAX_POWERS}")
        for e in entries:
            if not 0 <= e.value < MAX_VALUE:
                raise ValueOutOfRange(f"value {e.value} outside [0, 2^32)")
        self.z = z
        keyed = [(e, id_hash(e.user_id, e.time)) for e in entries]
        if not presorted:
            # presorted=True lets tests model a server that skips the sort
            keyed.sort(key=lambda p: (p[0].value, p[1]))
        self.entries = [e for e, _ in keyed]
        self.values = [e.value for e in self.entries]
        self.leaves = [SumLeaf(tuple(commit_powers(e.value, e.seed, z)), h) for e, h in keyed]
        self._levels = build_levels([leaf.node() for leaf in self.leaves], z)

    @property
    def n(self) -> int:
        return len(self.leaves)

    @property
    def root(self) -> SumNode:
        return self._levels[-1][0]

    @property
    def root_hash(self) -> bytes:
        return self.root.hash

    def total_seed(self) -> int:
        return sum(e.seed for e in self.entries) % ORDER

    def power_sums(self) -> list[int]:
        return [sum(v**j for v in self.values) for j in range(1, self.z + 1)]

    def root_children(self) -> bytes:
        """Hash preimage material below the root: both child hashes for an
        internal root, the identity hash when the root is the only leaf."""
        if self.n == 1:
            return self.leaves[0].id_hash
        below = self._levels[-2]
        left = below[0]
        right = below[1] if len(below) > 1 else SumNode.empty(self.z)
        return left.hash + right.hash

    def index_of(self, ident: bytes) -> int | None:
        for i, leaf in enumerate(self.leaves):
            if leaf.id_hash == ident:
                return i
        return None

    def inclusion_proof(self, index: int) -> SumInclusionProof:
        if not 0 <= index < self.n:
            raise IndexOutOfBounds(f"index {index} not in [0, {self.n})")
        empty = SumNode.empty(self.z)
        copath = []
        i = index
        for level in self._levels[:-1]:
            sib_i = i ^ 1
            sib = level[sib_i] if sib_i < len(level) else empty
            copath.append(CopathEntry(sib.hash, sib.commitments, sib.count, sibling_left=sib_i < i))
            i //= 2
        return SumInclusionProof(self.leaves[index], tuple(copath))

    def leftmost_geq(self, v: int) -> int | None:
        i = bisect.bisect_left(self.values, v)
        return i if i < self.n else None

    def rightmost_leq(self, v: int) -> int | None:
        i = bisect.bisect_right(self.values, v) - 1
        return i if i >= 0 else None
