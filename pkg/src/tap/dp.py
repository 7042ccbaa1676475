"""Bounded-noise differential privacy.

Noise Z lives on {-b, ..., b}. A density g on {0, ..., b} with cumulative sum
G fixes it: P(Z <= z) = G(z + b) for z <= 0, and Z is symmetric, so the mass
at z is g(b - |z|). g(b) is the mass at zero and g(0) the mass at each
extreme; the total is g(b) + 2*G(b - 1), which must equal one.

For sensitivity D and b >= D the mechanism true + Z is (eps, delta)-DP with
delta = G(D - 1) and eps the log of the largest probability ratio over the
outputs both neighbours can produce.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .crypto.rangeproof import RangeProof, prove_range, verify_range
from .errors import BoundTooSmall, NoiseExceedsBound, NormalizationViolation, UnboundedSensitivity

NORMALIZATION_TOL = 1e-12


def sensitivity(query_kind: str, gamma: int | None = None) -> int:
    """Largest change in the true result when one row is removed."""
    if query_kind == "count":
        return 1
    if query_kind == "sum":
        if gamma is None:
            raise UnboundedSensitivity("a sum has unbounded sensitivity without a value bound")
        return int(gamma)
    raise ValueError(f"no sensitivity rule for {query_kind!r}")


@dataclass(frozen=True)
class NoiseDistribution:
    b: int
    g: tuple  # g(0..b)

    @property
    def support(self) -> np.ndarray:
        return np.arange(-self.b, self.b + 1)

    @property
    def pmf(self) -> np.ndarray:
        """Probabilities for z = -b..b."""
        g = np.asarray(self.g, dtype=float)
        return np.concatenate([g, g[:-1][::-1]])

    def prob(self, z: int) -> float:
        return float(self.g[self.b - abs(z)]) if abs(z) <= self.b else 0.0

    def G(self, x: int) -> float:
        if x < 0:
            return 0.0
        return float(sum(self.g[: min(x, self.b) + 1]))

    def sample(self, rng: np.random.Generator, size=None):
        return rng.choice(self.support, size=size, p=self.pmf)

    def to_dict(self) -> dict:
        return {"b": self.b, "pmf": [repr(float(p)) for p in self.pmf]}


def make_bounded_noise(b: int, g: Sequence[float]) -> NoiseDistribution:
    if b < 0:
        raise ValueError("b must be non-negative")
    g = tuple(float(x) for x in g)
    if len(g) != b + 1:
        raise ValueError(f"g needs {b + 1} entries, got {len(g)}")
    if any(x < 0 or math.isnan(x) for x in g):
        raise NormalizationViolation("g must be non-negative")
    total = g[b] + 2 * sum(g[:b])
    if abs(total - 1.0) > NORMALIZATION_TOL:
        raise NormalizationViolation(f"g(b) + 2G(b-1) = {total!r}, expected 1")
    return NoiseDistribution(b, g)


def uniform_noise(b: int) -> NoiseDistribution:
    return make_bounded_noise(b, [1.0 / (2 * b + 1)] * (b + 1))


def geometric_noise(b: int, alpha: float = 0.5) -> NoiseDistribution:
    """Truncated two-sided geometric: mass at z proportional to alpha^|z|."""
    if not 0 < alpha <= 1:
        raise ValueError("alpha must be in (0, 1]")
    w = np.array([alpha ** (b - x) for x in range(b + 1)])
    w /= w[b] + 2 * w[:b].sum()
    g = w.tolist()
    # push rounding residue into the peak so the constraint holds tightly
    g[b] = 1.0 - 2 * math.fsum(g[:b])
    return make_bounded_noise(b, g)


class DpParameters(NamedTuple):
    epsilon: float
    delta: float


def _output_pmf(dist: NoiseDistribution, center: int, lo: int, hi: int) -> np.ndarray:
    return np.array([dist.prob(a - center) for a in range(lo, hi + 1)])


def epsilon_delta(dist: NoiseDistribution, delta_sens: int, r_d: int | None = None,
                  r_d_prime: int | None = None) -> DpParameters:
    """(eps, delta) for one neighbour placement, or the worst case over all
    placements |r_d - r_d_prime| <= delta_sens when they are omitted."""
    if dist.b < delta_sens:
        raise BoundTooSmall(f"b = {dist.b} is below the sensitivity {delta_sens}")
    delta = dist.G(delta_sens - 1)
    if r_d is None or r_d_prime is None:
        gaps = range(0, delta_sens + 1)
    else:
        if abs(r_d - r_d_prime) > delta_sens:
            raise ValueError("placement exceeds the sensitivity")
        gaps = [abs(r_d - r_d_prime)]
    eps = 0.0
    for k in gaps:
        # by symmetry take the larger result at k, the smaller at 0
        lo, hi = k - dist.b, dist.b
        p_hi = _output_pmf(dist, k, lo, hi)
        p_lo = _output_pmf(dist, 0, lo, hi)
        for num, den in ((p_hi, p_lo), (p_lo, p_hi)):
            for x, y in zip(num, den):
                if x == 0 and y == 0:
                    continue
                eps = max(eps, math.inf if y == 0 else math.log(x / y))
    return DpParameters(eps, delta)


def tight_excess(dist: NoiseDistribution, delta_sens: int, epsilon: float) -> float:
    """Largest over placements and orderings of sum_a max(P_D(a) - e^eps P_D'(a), 0)."""
    worst = 0.0
    factor = math.exp(epsilon) if epsilon != math.inf else math.inf
    for k in range(0, delta_sens + 1):
        lo, hi = -dist.b, k + dist.b
        p_a = _output_pmf(dist, k, lo, hi)
        p_b = _output_pmf(dist, 0, lo, hi)
        for x, y in ((p_a, p_b), (p_b, p_a)):
            if factor == math.inf:
                excess = float(np.sum(np.where(y == 0, x, 0.0)))
            else:
                excess = float(np.sum(np.maximum(x - factor * y, 0.0)))
            worst = max(worst, excess)
    return worst


def dp_oracle_check(dist: NoiseDistribution, delta_sens: int, epsilon: float, delta: float,
                    tol: float = NORMALIZATION_TOL) -> bool:
    """Brute-force check of the (eps, delta) inequality over every neighbour
    placement. For a single output distribution pair the worst set S is the
    set where P_D exceeds e^eps P_D', so checking that set suffices."""
    return tight_excess(dist, delta_sens, epsilon) <= delta + tol


class LaplaceMechanism(NamedTuple):
    sample: Callable
    epsilon: float
    scale: float
    transparency_preserving: bool = False  # unbounded noise lets a server distort results at will


def laplace_baseline(delta_sens: int, sigma: float) -> LaplaceMechanism:
    if sigma <= 0:
        raise ValueError("sigma must be positive")

    def sample(rng: np.random.Generator, size=None):
        return rng.laplace(0.0, sigma, size=size)

    return LaplaceMechanism(sample, delta_sens / sigma, sigma)


def prove_noise_bound(noisy: int, true_value: int, seed: int, b: int, commitment=None) -> RangeProof:
    """Prove the committed true result lies within b of the published noisy one."""
    if abs(noisy - true_value) > b:
        raise NoiseExceedsBound(f"|{noisy} - {true_value}| exceeds {b}")
    return prove_range(true_value, seed, noisy - b, noisy + b + 1, commitment=commitment)


def verify_noise_bound(commitment, noisy: int, b: int, proof: RangeProof) -> bool:
    return verify_range(commitment, noisy - b, noisy + b + 1, proof)
