"""Erasure-aware GF(2) arithmetic on bit-vector rows.

Coefficient vectors are Python ints used as bitsets: bit ``i`` is the
coefficient of variable ``i`` (0-based).  Payload symbols are ints as well,
so any symbol width S works with plain XOR.  ``None`` is the ERASED marker.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import ErasedOperand, InconsistentSystem

ERASED = None


def bits_to_mask(bits: str | Sequence[int]) -> int:
    """``"110"`` -> mask with variables 0 and 1 set (left char is variable 0)."""
    mask = 0
    for i, b in enumerate(bits):
        if int(b):
            mask |= 1 << i
    return mask


def mask_to_bits(mask: int, n: int) -> str:
    return "".join("1" if (mask >> i) & 1 else "0" for i in range(n))


def lowest_bit(mask: int) -> int:
    return (mask & -mask).bit_length() - 1


def iter_bits(mask: int):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


@dataclass(frozen=True)
class BinaryRow:
    """One equation: coefficient bitset over ``n`` variables and its payload."""

    coeffs: int
    payload: int | None
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("row needs at least one variable")
        if self.coeffs >> self.n:
            raise ValueError(f"coefficients {self.coeffs:#b} exceed {self.n} variables")

    @classmethod
    def from_bits(cls, bits: str | Sequence[int], payload: int | None = 0) -> "BinaryRow":
        return cls(bits_to_mask(bits), payload, len(bits))

    @classmethod
    def erased(cls, n: int) -> "BinaryRow":
        return cls(0, ERASED, n)

    @property
    def is_erased(self) -> bool:
        return self.payload is ERASED

    @property
    def weight(self) -> int:
        return self.coeffs.bit_count()

    def bits(self) -> str:
        return mask_to_bits(self.coeffs, self.n)

    def __repr__(self):
        pay = "E" if self.is_erased else self.payload
        return f"BinaryRow({self.bits()}, {pay})"


@dataclass(frozen=True)
class LinearSystem:
    rows: tuple[BinaryRow, ...]
    n_vars: int

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))
        for row in self.rows:
            if row.n != self.n_vars:
                raise ValueError(f"row length {row.n} != n_vars {self.n_vars}")


def row_xor(a: BinaryRow, b: BinaryRow) -> BinaryRow:
    if a.n != b.n:
        raise ValueError("rows have different lengths")
    if a.is_erased or b.is_erased:
        raise ErasedOperand("cannot combine an erased row")
    return BinaryRow(a.coeffs ^ b.coeffs, a.payload ^ b.payload, a.n)


def _eliminate(equations: Iterable[tuple[int, int]]) -> dict[int, list[int]]:
    """Reduced echelon form keyed by pivot column.

    Rows are taken in the given order and each new row pivots on its lowest
    set column after reduction, so the result is canonical for a row order.
    Returns ``{pivot: [coeffs, payload]}`` fully reduced (RREF).
    """
    pivots: dict[int, list[int]] = {}
    for coeffs, payload in equations:
        for p, (pc, pp) in pivots.items():
            if (coeffs >> p) & 1:
                coeffs ^= pc
                payload ^= pp
        if coeffs == 0:
            if payload:
                raise InconsistentSystem("elimination produced 0 = 1")
            continue
        p = lowest_bit(coeffs)
        for other in pivots.values():
            if (other[0] >> p) & 1:
                other[0] ^= coeffs
                other[1] ^= payload
        pivots[p] = [coeffs, payload]
    return pivots


def solve_unique(system: LinearSystem, known: Mapping[int, int] | None = None) -> list[int | None]:
    """Values of every variable that the non-erased rows plus ``known`` pin down.

    Entry ``i`` is the symbol of variable ``i`` or ``None`` (UNRESOLVED).  A
    variable is resolved iff its unit vector lies in the row space, which
    after RREF means its pivot row has no other bit set.
    """
    n = system.n_vars
    known = dict(known or {})
    for var in known:
        if not 0 <= var < n:
            raise ValueError(f"known variable {var} out of range for {n} variables")
    equations = [(1 << var, val) for var, val in sorted(known.items())]
    equations += [(r.coeffs, r.payload) for r in system.rows if not r.is_erased]
    pivots = _eliminate(equations)
    out: list[int | None] = [None] * n
    for p, (coeffs, payload) in pivots.items():
        if coeffs == 1 << p:
            out[p] = payload
    return out


def resolved_mask(coeff_rows: Iterable[int], known_mask: int = 0) -> int:
    """Bitset of variables determined by coefficient rows alone (no payloads)."""
    pivots: dict[int, int] = {}
    rows = [1 << v for v in iter_bits(known_mask)] + list(coeff_rows)
    for coeffs in rows:
        for p, pc in pivots.items():
            if (coeffs >> p) & 1:
                coeffs ^= pc
        if coeffs == 0:
            continue
        p = lowest_bit(coeffs)
        for q in pivots:
            if (pivots[q] >> p) & 1:
                pivots[q] ^= coeffs
        pivots[p] = coeffs
    out = 0
    for p, coeffs in pivots.items():
        if coeffs == 1 << p:
            out |= 1 << p
    return out


def span_membership(target: int, basis: Sequence[BinaryRow]) -> tuple[int, ...] | None:
    """Row indices of ``basis`` whose coefficient XOR equals ``target``.

    Pivots are chosen by lowest row index then lowest column, so the returned
    witness is canonical.  ``None`` when ``target`` is outside the span.
    """
    pivots: dict[int, tuple[int, int]] = {}  # column -> (coeffs, combination over row indices)
    for idx, row in enumerate(basis):
        coeffs, combo = row.coeffs, 1 << idx
        for p in sorted(pivots):
            pc, pcombo = pivots[p]
            if (coeffs >> p) & 1:
                coeffs ^= pc
                combo ^= pcombo
        if coeffs:
            pivots[lowest_bit(coeffs)] = (coeffs, combo)
    # reduce target against pivots in column order; each pivot row has zeros
    # at lower pivot columns, so ascending order terminates correctly
    combo = 0
    for p in sorted(pivots):
        if (target >> p) & 1:
            pc, pcombo = pivots[p]
            target ^= pc
            combo ^= pcombo
    if target:
        return None
    return tuple(iter_bits(combo))


def combine(rows: Sequence[BinaryRow], indices: Iterable[int]) -> BinaryRow:
    """XOR of the selected rows (coefficients and payloads)."""
    indices = list(indices)
    if not indices:
        raise ValueError("empty combination")
    acc = rows[indices[0]]
    for i in indices[1:]:
        acc = row_xor(acc, rows[i])
    return acc
