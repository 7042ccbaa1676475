"""Proof objects exchanged between server, clients and auditors."""

from __future__ import annotations

from dataclasses import dataclass

from .crypto.rangeproof import RangeProof
from .prefix_tree import ExtensionProof, PrefixInclusionProof, RangeCoverProof
from .sum_tree import SumInclusionProof, SumLeaf


@dataclass(frozen=True)
class LookupProof:
    """The user's row exists: its value plus both inclusion proofs."""

    value: int
    prefix: PrefixInclusionProof
    sum: SumInclusionProof


@dataclass(frozen=True)
class NonExistenceProof:
    """The bucket exists; every leaf is revealed so the client can see its
    identity hash is not among them."""

    prefix: PrefixInclusionProof
    leaves: tuple


@dataclass(frozen=True)
class BucketAbsenceProof:
    """No bucket exists for the requested (time, types) key."""

    cover: RangeCoverProof


@dataclass(frozen=True)
class RootOpening:
    """Preimage of a bucket's sum-tree root: the 64-byte child-hash pair for
    an internal root, or the 32-byte identity hash for a single-leaf root."""

    children: bytes
    commitments: tuple
    count: int


@dataclass(frozen=True)
class AggregateProof:
    cover: RangeCoverProof
    total_seed: int
    sums: tuple
    openings: tuple


@dataclass(frozen=True)
class Witness:
    """A sum-tree leaf with its inclusion proof and a range proof on its
    first commitment."""

    inclusion: SumInclusionProof
    range_proof: RangeProof


@dataclass(frozen=True)
class MinMaxProof:
    cover: RangeCoverProof
    value: int
    witness_index: int
    witnesses: tuple


@dataclass(frozen=True)
class QuantileWitness:
    at_least: Witness | None  # leftmost leaf with value >= v*
    at_most: Witness | None  # rightmost leaf with value <= v*


@dataclass(frozen=True)
class QuantileProof:
    cover: RangeCoverProof
    value: int
    witnesses: tuple


@dataclass(frozen=True)
class BucketAudit:
    leaves: tuple
    sortedness: tuple
    bounds: tuple


@dataclass(frozen=True)
class AuditProof:
    extension: ExtensionProof
    buckets: tuple


__all__ = [
    "LookupProof", "NonExistenceProof", "BucketAbsenceProof", "RootOpening", "AggregateProof",
    "Witness", "MinMaxProof", "QuantileWitness", "QuantileProof", "BucketAudit", "AuditProof",
    "SumLeaf", "SumInclusionProof", "RangeProof", "RangeCoverProof", "ExtensionProof",
    "PrefixInclusionProof",
]
