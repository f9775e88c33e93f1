"""User-side separation of the other users' round packets."""
from __future__ import annotations

from dataclasses import dataclass

from .channel import Origin, ReceivedMatrix
from .gf2 import BinaryRow, LinearSystem, solve_unique
from .strategy import TransmissionMatrix


@dataclass(frozen=True)
class SeparationResult:
    values: tuple[int | None, ...]
    destination: int

    def resolved(self) -> frozenset[int]:
        return frozenset(i for i, v in enumerate(self.values) if v is not None)

    def unresolved(self) -> frozenset[int]:
        return frozenset(i for i, v in enumerate(self.values) if v is None)


def separate(received: ReceivedMatrix, destination: int, own_packet: int) -> SeparationResult:
    """Solve own unit row plus the received rows; ``None`` marks an erased packet."""
    if received.origin is not Origin.USER or received.user != destination:
        raise ValueError(f"matrix was not received by user {destination}")
    n = received.rows[0].n
    own = BinaryRow(1 << destination, own_packet, n)
    values = solve_unique(LinearSystem((own,) + received.rows, n))
    return SeparationResult(tuple(values), destination)


def feasibility_check(A: TransmissionMatrix) -> bool:
    """Separation can succeed only with at least N - 1 slots."""
    return A.n_slots >= A.n_users - 1
