"""One round over the erasure multi-way relay channel.

Uplink: every transmitting entry ``a[l, i]`` survives independently with
probability ``1 - eps_up[i]``; the relay receives the modulo-2 sum of the
survivors (ERASED when nobody survived) and is told which entries survived.
Relay: forward as-is, or reconstruct damaged rows of ``A`` from the span of
the received rows.  Downlink: user ``j`` loses each broadcast row
independently with probability ``eps_down[j]``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .gf2 import BinaryRow, combine, span_membership
from .strategy import TransmissionMatrix


class Origin(str, enum.Enum):
    RELAY_RAW = "relay_raw"
    RELAY_RECONSTRUCTED = "relay_reconstructed"
    USER = "user"


@dataclass(frozen=True)
class ErasureProfile:
    eps_up: tuple[float, ...]
    eps_down: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "eps_up", tuple(float(e) for e in self.eps_up))
        object.__setattr__(self, "eps_down", tuple(float(e) for e in self.eps_down))
        if len(self.eps_up) != len(self.eps_down):
            raise ValueError("eps_up and eps_down must have one entry per user")
        for e in self.eps_up + self.eps_down:
            if not 0.0 <= e <= 1.0:
                raise ValueError(f"erasure probability {e} outside [0, 1]")

    @classmethod
    def symmetric(cls, n_users: int, eps_up: float, eps_down: float) -> "ErasureProfile":
        return cls((eps_up,) * n_users, (eps_down,) * n_users)

    @property
    def n_users(self) -> int:
        return len(self.eps_up)

    @property
    def is_symmetric(self) -> bool:
        return len(set(self.eps_up)) == 1 and len(set(self.eps_down)) == 1

    def rotated(self, shift: int) -> "ErasureProfile":
        """User ``k`` of the result is user ``(k + shift) % N`` of this profile."""
        n = self.n_users
        idx = [(k + shift) % n for k in range(n)]
        return ErasureProfile([self.eps_up[i] for i in idx], [self.eps_down[i] for i in idx])


@dataclass(frozen=True)
class ReceivedMatrix:
    rows: tuple[BinaryRow, ...]
    origin: Origin
    user: int | None = None

    def coefficient_rows(self) -> tuple[int, ...]:
        """Coefficient bitsets with 0 standing in for ERASED rows."""
        return tuple(0 if r.is_erased else r.coeffs for r in self.rows)


@dataclass(frozen=True)
class UplinkOutcome:
    survived: tuple[int, ...]  # per slot: bitset of transmitters whose signal got through (a AND b)
    received: ReceivedMatrix


def uplink_from_survivals(A: TransmissionMatrix, x: Sequence[int], survived: Sequence[int]) -> UplinkOutcome:
    """Deterministic uplink given the survival pattern ``b`` as per-slot bitsets."""
    if len(x) != A.n_users:
        raise ValueError(f"expected {A.n_users} user symbols, got {len(x)}")
    n = A.n_users
    rows = []
    got = []
    for a_row, b_row in zip(A.rows, survived):
        live = a_row & b_row
        got.append(live)
        if live == 0:
            rows.append(BinaryRow.erased(n))
            continue
        payload = 0
        i = 0
        m = live
        while m:
            if m & 1:
                payload ^= x[i]
            m >>= 1
            i += 1
        rows.append(BinaryRow(live, payload, n))
    return UplinkOutcome(tuple(got), ReceivedMatrix(tuple(rows), Origin.RELAY_RAW))


def survival_masks(uniforms: np.ndarray, eps: Sequence[float]) -> tuple[int, ...]:
    """Turn an (L, N) block of U[0,1) draws into per-slot survival bitsets."""
    alive = uniforms >= np.asarray(eps, dtype=float)[None, :]
    weights = 1 << np.arange(alive.shape[1], dtype=np.int64)
    return tuple(int(v) for v in (alive.astype(np.int64) * weights).sum(axis=1))


def uplink(A: TransmissionMatrix, x: Sequence[int], profile: ErasureProfile, rng: np.random.Generator) -> UplinkOutcome:
    draws = rng.random((A.n_slots, A.n_users))
    return uplink_from_survivals(A, x, survival_masks(draws, profile.eps_up))


def relay_forward(up: UplinkOutcome) -> ReceivedMatrix:
    return ReceivedMatrix(up.received.rows, Origin.RELAY_RAW)


def relay_reconstruct(up: UplinkOutcome, A: TransmissionMatrix) -> ReceivedMatrix:
    """Restore damaged rows of ``A`` by XOR-ing received rows when possible.

    A row is either restored exactly (coefficients equal ``A``'s row) or left
    as received, so no row ever loses information.
    """
    received = up.received.rows
    live = [r for r in received if not r.is_erased]
    out = []
    for target, row in zip(A.rows, received):
        if not row.is_erased and row.coeffs == target:
            out.append(row)
            continue
        witness = span_membership(target, live)
        out.append(row if witness is None else combine(live, witness))
    return ReceivedMatrix(tuple(out), Origin.RELAY_RECONSTRUCTED)


def downlink_from_masks(x_r: ReceivedMatrix, kept: Sequence[int]) -> list[ReceivedMatrix]:
    """User ``j`` receives broadcast row ``l`` iff bit ``l`` of ``kept[j]`` is set."""
    out = []
    for j, mask in enumerate(kept):
        rows = tuple(
            row if (mask >> l) & 1 else BinaryRow.erased(row.n)
            for l, row in enumerate(x_r.rows)
        )
        out.append(ReceivedMatrix(rows, Origin.USER, j))
    return out


def downlink(x_r: ReceivedMatrix, profile: ErasureProfile, rng: np.random.Generator) -> list[ReceivedMatrix]:
    draws = rng.random((profile.n_users, len(x_r.rows)))
    return downlink_from_masks(x_r, downlink_masks(draws, profile.eps_down))


def downlink_masks(uniforms: np.ndarray, eps_down: Sequence[float]) -> tuple[int, ...]:
    """(N, L) block of U[0,1) draws -> per-user bitsets of rows that got through."""
    alive = uniforms >= np.asarray(eps_down, dtype=float)[:, None]
    weights = 1 << np.arange(alive.shape[1], dtype=np.int64)
    return tuple(int(v) for v in (alive.astype(np.int64) * weights).sum(axis=1))
