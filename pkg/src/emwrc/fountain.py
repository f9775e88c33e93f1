"""Synchronized LT-style fountain coding on top of the relay rounds.

Every user runs the same counter-keyed generator, so the combination of a
coded packet is a pure function of (seed, user, seq) and never has to be
sent.  Source indices are 0-based.

The outer LDPC precode of a Raptor code is not implemented; decoding falls
back to Gaussian elimination once peeling stalls, which plays its role.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, NegativeMass
from .gf2 import BinaryRow, LinearSystem, iter_bits, lowest_bit, solve_unique

ENCODER_STAGE = 0xF0C0
NEED_MORE = None

# parameters of the experiment in the overhead figure
DEFAULT_M = 78
DEFAULT_Z = 0.9872
DEFAULT_Q1 = 0.01


@dataclass(frozen=True)
class DegreeDistribution:
    probabilities: np.ndarray  # probabilities[d - 1] = P(d)
    m: int
    z: float
    a: float
    q: np.ndarray = field(repr=False)  # unnormalized Q(1..m)

    @property
    def cdf(self) -> np.ndarray:
        c = np.cumsum(self.probabilities)
        c[-1] = 1.0
        return c

    def pmf(self, d: int) -> float:
        return float(self.probabilities[d - 1]) if 1 <= d <= self.m else 0.0

    def mean(self) -> float:
        return float(np.dot(np.arange(1, self.m + 1), self.probabilities))


def log_series_tail(z: float, m: int) -> float:
    """sum_{i >= m} z^i / i via the closed form of the full series."""
    return -math.log1p(-z) - sum(z ** i / i for i in range(1, m))


def log_series_tail_direct(z: float, m: int, tol: float = 1e-17) -> float:
    """Same tail by brute-force summation until the terms vanish."""
    total, i = 0.0, m
    term = z ** m / m
    while term > tol * max(total, 1e-300) or i == m:
        total += term
        i += 1
        term = z ** i / i
    return total


def build_distribution(m: int, z: float, q1: float) -> DegreeDistribution:
    if m < 2:
        raise DomainError(f"max degree must be at least 2, got {m}")
    if not 0.0 < z < 1.0:
        raise DomainError(f"z must lie in (0, 1), got {z}")
    if not 0.0 <= q1 < 1.0:
        raise DomainError(f"Q(1) must lie in [0, 1), got {q1}")
    a = (m - 1) / m + log_series_tail(z, m) / (m * z ** (m - 1))
    q = np.zeros(m)
    q[0] = q1
    i = np.arange(2, m)
    q[1:m - 1] = 1.0 / (a * i * (i - 1))
    q[m - 1] = 1.0 - (m - 2) / (a * (m - 1))
    if (q < 0).any():
        bad = int(np.argmin(q)) + 1
        raise NegativeMass(f"Q({bad}) = {q[bad - 1]:.3g} is negative")
    return DegreeDistribution(q / q.sum(), m, z, a, q)


def default_distribution() -> DegreeDistribution:
    return build_distribution(DEFAULT_M, DEFAULT_Z, DEFAULT_Q1)


def sample_degrees(dist: DegreeDistribution, rng: np.random.Generator, size) -> np.ndarray:
    """Inverse-CDF draws of degrees in 1..m."""
    u = rng.random(size)
    return np.searchsorted(dist.cdf, u, side="right") + 1


@dataclass(frozen=True)
class CodedPacket:
    source_user: int
    sequence: int
    payload: int
    combination: frozenset[int]

    @property
    def mask(self) -> int:
        out = 0
        for i in self.combination:
            out |= 1 << i
        return out


def encoder_rng(seed: int, user: int, seq: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, ENCODER_STAGE, user, seq])))


def combination_for(user: int, seq: int, K: int, seed: int, dist: DegreeDistribution) -> frozenset[int]:
    if K < 1:
        raise DomainError(f"need at least one source packet, got K={K}")
    rng = encoder_rng(seed, user, seq)
    d = min(int(sample_degrees(dist, rng, None)), K)  # degrees above K collapse onto K
    return frozenset(int(v) for v in rng.choice(K, size=d, replace=False))


def encode_next(user: int, seq: int, K: int, source: Sequence[int], seed: int,
                dist: DegreeDistribution | None = None) -> CodedPacket:
    if len(source) != K:
        raise ValueError(f"expected {K} source packets, got {len(source)}")
    combo = combination_for(user, seq, K, seed, dist or default_distribution())
    payload = 0
    for i in combo:
        payload ^= source[i]
    return CodedPacket(user, seq, payload, combo)


def _as_mask(combination) -> int:
    if isinstance(combination, int):
        return combination
    out = 0
    for i in combination:
        out |= 1 << i
    return out


def peel(rows: Iterable[tuple[int, int]], K: int) -> tuple[dict[int, int], list[list[int]]]:
    """Belief-propagation pass; returns (recovered symbols, residual rows)."""
    known: dict[int, int] = {}
    pending = [[c, p] for c, p in rows if c]
    ripple = [r for r in pending if r[0] & (r[0] - 1) == 0]
    while ripple:
        c, p = ripple.pop()
        if c == 0:
            continue
        i = lowest_bit(c)
        if i in known:
            continue
        known[i] = p
        bit = 1 << i
        for r in pending:
            if r[0] & bit:
                r[0] ^= bit
                r[1] ^= p
                if r[0] and r[0] & (r[0] - 1) == 0:
                    ripple.append(r)
    residual = [r for r in pending if r[0]]
    return known, residual


def decode(received: Iterable[tuple], K: int) -> list[int] | None:
    """All K source packets, or NEED_MORE (None) when they are not pinned down."""
    rows = []
    for combination, payload in received:
        mask = _as_mask(combination)
        if mask >> K:
            raise ValueError(f"combination {combination} reaches past K={K}")
        rows.append((mask, payload))
    known, residual = peel(rows, K)
    if len(known) == K:
        return [known[i] for i in range(K)]
    if len(rows) < K:
        return NEED_MORE
    system = LinearSystem(tuple(BinaryRow(c, p, K) for c, p in residual), K)
    values = solve_unique(system, known)
    if any(v is None for v in values):
        return NEED_MORE
    return values


class IncrementalDecoder:
    """Online elimination for one (source, destination) stream.

    Rows are kept in echelon form keyed by their lowest set column.
    """

    def __init__(self, K: int):
        if K < 1:
            raise DomainError(f"need at least one source packet, got K={K}")
        self.K = K
        self._pivots: dict[int, tuple[int, int]] = {}
        self.received = 0
        self.completed_at: int | None = None  # packets received when rank first hit K

    @property
    def rank(self) -> int:
        return len(self._pivots)

    @property
    def done(self) -> bool:
        return self.rank == self.K

    def add(self, combination, payload: int) -> bool:
        """Feed one packet; True when it raised the rank."""
        self.received += 1
        c = _as_mask(combination)
        pivots = self._pivots
        while c:
            p = lowest_bit(c)
            row = pivots.get(p)
            if row is None:
                pivots[p] = (c, payload)
                if self.completed_at is None and len(pivots) == self.K:
                    self.completed_at = self.received
                return True
            c ^= row[0]
            payload ^= row[1]
        return False

    def solve(self) -> list[int] | None:
        if not self.done:
            return NEED_MORE
        values = [0] * self.K
        for p in sorted(self._pivots, reverse=True):
            c, payload = self._pivots[p]
            for q in iter_bits(c & ~(1 << p)):
                payload ^= values[q]
            values[p] = payload
        return values


def measure_overhead(k_prime, K: int) -> float:
    """(K' - K) / K; with one K' per destination the system figure is the largest."""
    counts = np.atleast_1d(np.asarray(k_prime))
    if K < 1:
        raise DomainError(f"need at least one source packet, got K={K}")
    if (counts < K).any():
        raise DomainError(f"K' must be at least K={K}")
    return float((counts.max() - K) / K)
