"""Pedersen commitments C(v, r) = v*G + r*H."""

from __future__ import annotations

from .group import Point, point_sum

G = Point.base_mul(1)
H = Point.hash_to_point(b"tap/pedersen/blinding-generator")

Commitment = Point


def commit(v: int, r: int) -> Point:
    return Point.base_mul(v) + H * r


def commit_powers(v: int, r: int, z: int) -> list[Point]:
    """Commitments to v, v^2, ..., v^z, all under the same seed."""
    blind = H * r
    return [Point.base_mul(v**j) + blind for j in range(1, z + 1)]


def add_commitments(a: Point, b: Point) -> Point:
    return a + b


def sum_commitments(cs) -> Point:
    return point_sum(cs)
