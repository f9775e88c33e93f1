"""Users' transmission matrices (OWR / MPWR / OPPWR) and per-round schedules."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import SchemeMismatch, TooFewUsers
from .gf2 import mask_to_bits

# stage tag mixed into the schedule generator key so it never collides with channel draws
SCHEDULE_STAGE = 0x5C4E


class Scheme(str, enum.Enum):
    OWR = "owr"
    MPWR = "mpwr"
    OPPWR = "oppwr"

    @classmethod
    def parse(cls, value: "str | Scheme") -> "Scheme":
        if isinstance(value, Scheme):
            return value
        try:
            return cls(value.lower())
        except ValueError:
            raise ValueError(f"unknown scheme {value!r}; expected owr, mpwr or oppwr") from None

    def slots(self, n_users: int) -> int:
        """Uplink (= downlink) slots per round."""
        return n_users - 1 if self is Scheme.MPWR else n_users

    @property
    def pairwise(self) -> bool:
        return self is not Scheme.OWR


@dataclass(frozen=True)
class TransmissionMatrix:
    """L x N binary matrix; ``rows[l]`` is the bitset of users sending in slot ``l``."""

    rows: tuple[int, ...]
    scheme: Scheme
    n_users: int

    @property
    def n_slots(self) -> int:
        return len(self.rows)

    def to_array(self) -> np.ndarray:
        out = np.zeros((self.n_slots, self.n_users), dtype=np.uint8)
        for l, row in enumerate(self.rows):
            for i in range(self.n_users):
                out[l, i] = (row >> i) & 1
        return out

    def to_lists(self) -> list[str]:
        return [mask_to_bits(r, self.n_users) for r in self.rows]

    def column_weights(self) -> list[int]:
        return [sum((r >> i) & 1 for r in self.rows) for i in range(self.n_users)]


def build_matrix(scheme: Scheme | str, n_users: int) -> TransmissionMatrix:
    scheme = Scheme.parse(scheme)
    if n_users < 2:
        raise TooFewUsers(f"need at least 2 users, got {n_users}")
    if scheme is Scheme.OWR:
        rows = [1 << i for i in range(n_users)]
    else:
        rows = [(1 << l) | (1 << (l + 1)) for l in range(n_users - 1)]
        if scheme is Scheme.OPPWR:
            rows.append(1 | (1 << (n_users - 1)))
    return TransmissionMatrix(tuple(rows), scheme, n_users)


@dataclass(frozen=True)
class Schedule:
    """Transmission order ``permutation[k]`` = user taking pairing position ``k`` (0-based)."""

    permutation: tuple[int, ...]
    round_index: int

    def __post_init__(self):
        if sorted(self.permutation) != list(range(len(self.permutation))):
            raise ValueError(f"{self.permutation} is not a permutation of 0..{len(self.permutation) - 1}")

    @property
    def is_identity(self) -> bool:
        return all(p == i for i, p in enumerate(self.permutation))


def schedule_rng(seed: int, round_index: int) -> np.random.Generator:
    # counter keyed: the permutation for a round never depends on earlier rounds
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, SCHEDULE_STAGE, round_index])))


def next_schedule(seed: int, round_index: int, n_users: int, shuffled: bool) -> Schedule:
    if not shuffled:
        return Schedule(tuple(range(n_users)), round_index)
    perm = schedule_rng(seed, round_index).permutation(n_users)
    return Schedule(tuple(int(p) for p in perm), round_index)


def apply_schedule(matrix: TransmissionMatrix, sched: Schedule) -> TransmissionMatrix:
    """Relabel pairing positions with the scheduled users.

    Row ``l`` pairs positions ``l`` and ``l+1`` (and the OPPWR wrap row pairs
    the last and first positions), so substituting ``permutation`` into the
    column indices gives the round's matrix.
    """
    perm = sched.permutation
    if len(perm) != matrix.n_users:
        raise ValueError("schedule size does not match the matrix")
    if sched.is_identity:
        return matrix
    if matrix.scheme is Scheme.OWR:
        raise SchemeMismatch("OWR rows are per-user; a shuffled schedule does not apply")
    rows = []
    for row in matrix.rows:
        out = 0
        for i in range(matrix.n_users):
            if (row >> i) & 1:
                out |= 1 << perm[i]
        rows.append(out)
    return TransmissionMatrix(tuple(rows), matrix.scheme, matrix.n_users)
