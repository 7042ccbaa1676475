"""Interval proofs on Pedersen commitments, built from 32-bit range proofs.

A proof that C opens to v in [lo, hi) shows v - lo is a 32-bit value on
C - lo*G. Unless the interval is exactly 2^32 wide, a second proof shows
hi - 1 - v is a 32-bit value on (hi - 1)*G - C. Together they pin v to the
interval, provided hi - lo <= 2^32.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import ValueOutOfRange, WidthExceeded
from . import bulletproofs as bp
from .commitment import G, commit
from .group import ORDER, Point

WIDTH = 2**bp.N_BITS
K = WIDTH - 1


@dataclass(frozen=True)
class RangeProof:
    commitment: Point
    lo: int
    hi: int
    proof_bytes: bytes

    @property
    def statement(self) -> tuple[Point, int, int]:
        return (self.commitment, self.lo, self.hi)


def _context(c: Point, lo: int, hi: int, part: int) -> bytes:
    return (b"tap/interval" + bytes(c) + lo.to_bytes(16, "big", signed=True)
            + hi.to_bytes(16, "big", signed=True) + bytes([part]))


def _check_width(lo: int, hi: int) -> None:
    if hi - lo > WIDTH:
        raise WidthExceeded(f"interval [{lo}, {hi}) wider than 2^{bp.N_BITS}")


def _prove(v: int, r: int, lo: int, hi: int, c: Point) -> RangeProof:
    parts = [bp.prove((v - lo) % WIDTH, r, c - G * lo, _context(c, lo, hi, 0))]
    if hi - lo < WIDTH:
        parts.append(bp.prove((hi - 1 - v) % WIDTH, (-r) % ORDER, G * (hi - 1) - c, _context(c, lo, hi, 1)))
    return RangeProof(c, lo, hi, b"".join(parts))


def prove_range(v: int, r: int, lo: int, hi: int, commitment: Point | None = None) -> RangeProof:
    _check_width(lo, hi)
    if not lo <= v < hi:
        raise ValueOutOfRange(f"{v} not in [{lo}, {hi})")
    c = commitment if commitment is not None else commit(v, r)
    return _prove(v, r, lo, hi, c)


def forge_range(v: int, r: int, lo: int, hi: int, commitment: Point | None = None) -> RangeProof:
    """Run the prover without the honesty precondition.

    Models a cheating server in tests: for v outside [lo, hi) the output is
    well-formed but does not verify.
    """
    _check_width(lo, hi)
    c = commitment if commitment is not None else commit(v, r)
    return _prove(v, r, lo, hi, c)


def verify_range(c: Point, lo: int, hi: int, p: RangeProof) -> bool:
    if not isinstance(p, RangeProof) or not isinstance(c, Point):
        return False
    if p.commitment != c or p.lo != lo or p.hi != hi:
        return False
    if hi <= lo or hi - lo > WIDTH:
        return False
    n_parts = 1 if hi - lo == WIDTH else 2
    data = p.proof_bytes
    if not isinstance(data, (bytes, bytearray)) or len(data) != n_parts * bp.PROOF_LEN:
        return False
    L = bp.PROOF_LEN
    if not bp.verify(c - G * lo, bytes(data[:L]), _context(c, lo, hi, 0)):
        return False
    if n_parts == 2 and not bp.verify(G * (hi - 1) - c, bytes(data[L:]), _context(c, lo, hi, 1)):
        return False
    return True


def geq_bounds(a: int) -> tuple[int, int]:
    """Interval expressing v >= a."""
    return a, a + WIDTH


def leq_bounds(a: int) -> tuple[int, int]:
    """Interval expressing v <= a."""
    return a + 1 - WIDTH, a + 1


def eq_bounds(a: int) -> tuple[int, int]:
    return a, a + 1
