"""Exact EEER by exhaustive enumeration of erasure patterns.

Every uplink survival pattern over the transmitting entries of ``A`` and,
per destination, every downlink row-loss pattern is pushed through the real
channel, relay and separation code.  Which packets end up unresolved depends
only on the pattern, never on the erasure probabilities, so the outcome
table is computed once per (scheme, N, reconstruction) and cached; a
profile then only changes the pattern weights.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import channel
from .analytics import EquivalentErasureTable, PairwiseEEERMatrix
from .channel import ErasureProfile
from .errors import SchemeMismatch, TooLarge
from .separation import separate
from .strategy import Scheme, build_matrix

MAX_USERS = 7
DEFAULT_GUARD = 2 ** 24


@dataclass(frozen=True)
class _OutcomeTable:
    entries: tuple[tuple[int, int], ...]  # (slot, user) of each transmitting entry, bit order of the pattern index
    n_slots: int
    unresolved: np.ndarray  # (uplink pattern, downlink mask, destination) -> bitset of unresolved sources
    absent: np.ndarray      # (uplink pattern, slot, user) -> coefficient missing after the relay


def _check_size(scheme: Scheme, n_users: int, guard: int) -> None:
    if n_users > MAX_USERS:
        raise TooLarge(f"exact enumeration supports at most {MAX_USERS} users, got {n_users}")
    A = build_matrix(scheme, n_users)
    n_entries = sum(r.bit_count() for r in A.rows)
    count = 2 ** (n_entries + A.n_slots)
    if count > guard:
        raise TooLarge(f"{count} patterns per destination exceeds the guard {guard}")


@lru_cache(maxsize=64)
def _outcome_table(scheme: Scheme, n_users: int, reconstruction: bool) -> _OutcomeTable:
    A = build_matrix(scheme, n_users)
    L = A.n_slots
    entries = tuple((l, i) for l, row in enumerate(A.rows) for i in range(n_users) if (row >> i) & 1)
    x = [1 << i for i in range(n_users)]  # distinct symbols so every resolved value is checkable
    n_up, n_down = 2 ** len(entries), 2 ** L
    unresolved = np.zeros((n_up, n_down, n_users), dtype=np.uint16)
    absent = np.zeros((n_up, L, n_users), dtype=bool)
    memo: dict[tuple, int] = {}
    everyone = (1 << n_users) - 1

    for u in range(n_up):
        survived = [0] * L
        for t, (l, i) in enumerate(entries):
            if (u >> t) & 1:
                survived[l] |= 1 << i
        up = channel.uplink_from_survivals(A, x, survived)
        relay = channel.relay_reconstruct(up, A) if reconstruction else channel.relay_forward(up)
        coeffs = relay.coefficient_rows()
        for l, i in entries:
            absent[u, l, i] = not (coeffs[l] >> i) & 1
        for m in range(n_down):
            kept = tuple(c if (m >> l) & 1 else 0 for l, c in enumerate(coeffs))
            for j in range(n_users):
                key = (j, kept)
                lost = memo.get(key)
                if lost is None:
                    received = channel.downlink_from_masks(relay, [m] * n_users)[j]
                    result = separate(received, j, x[j])
                    for i, v in enumerate(result.values):
                        if v is not None and v != x[i]:
                            raise RuntimeError(f"separation returned a wrong symbol for user {i} at {j}")
                    lost = everyone ^ sum(1 << i for i in result.resolved())
                    memo[key] = lost
                unresolved[u, m, j] = lost
    return _OutcomeTable(entries, L, unresolved, absent)


def _uplink_weights(table: _OutcomeTable, profile: ErasureProfile) -> np.ndarray:
    n_up = table.unresolved.shape[0]
    idx = np.arange(n_up)
    w = np.ones(n_up)
    for t, (_, i) in enumerate(table.entries):
        alive = (idx >> t) & 1
        e = profile.eps_up[i]
        w *= np.where(alive == 1, 1.0 - e, e)
    return w


def _downlink_weights(n_slots: int, eps_down: float) -> np.ndarray:
    idx = np.arange(2 ** n_slots)
    w = np.ones(len(idx))
    for l in range(n_slots):
        w *= np.where((idx >> l) & 1, 1.0 - eps_down, eps_down)
    return w


def pattern_mass(scheme, profile: ErasureProfile, reconstruction: bool = False) -> float:
    """Total probability of the enumerated uplink x downlink space (should be 1)."""
    scheme = Scheme.parse(scheme)
    table = _outcome_table(scheme, profile.n_users, reconstruction)
    up = _uplink_weights(table, profile).sum()
    down = min(_downlink_weights(table.n_slots, e).sum() for e in profile.eps_down)
    return float(up * down)


def exact_eeer(scheme, profile: ErasureProfile, reconstruction: bool = False,
               guard: int = DEFAULT_GUARD) -> PairwiseEEERMatrix:
    scheme = Scheme.parse(scheme)
    n = profile.n_users
    _check_size(scheme, n, guard)
    table = _outcome_table(scheme, n, reconstruction)
    w_up = _uplink_weights(table, profile)
    eps = np.zeros((n, n))
    for j in range(n):
        w = np.outer(w_up, _downlink_weights(table.n_slots, profile.eps_down[j]))
        lost = table.unresolved[:, :, j]
        for i in range(n):
            if i != j:
                eps[i, j] = float(np.sum(w * ((lost >> i) & 1)))
    return PairwiseEEERMatrix(eps, scheme, reconstruction)


def exact_equivalent_uplink(scheme, profile: ErasureProfile, guard: int = DEFAULT_GUARD) -> EquivalentErasureTable:
    """Exact probability that each user's coefficient is missing from each of its rows after reconstruction."""
    scheme = Scheme.parse(scheme)
    if scheme is Scheme.OWR:
        raise SchemeMismatch("reconstruction has nothing to repair under OWR")
    n = profile.n_users
    _check_size(scheme, n, guard)
    table = _outcome_table(scheme, n, True)
    w_up = _uplink_weights(table, profile)
    miss = np.tensordot(w_up, table.absent.astype(float), axes=1)  # (slot, user)
    before = np.full(n, np.nan)
    within = np.full(n, np.nan)
    for i in range(n):
        if scheme is Scheme.OPPWR or i > 0:
            before[i] = miss[(i - 1) % n, i]
        if scheme is Scheme.OPPWR or i < n - 1:
            within[i] = miss[i, i]
    eps = np.asarray(profile.eps_up, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        pc_before = np.where(eps > 0, 1.0 - before / eps, 0.0)
        pc_within = np.where(eps > 0, 1.0 - within / eps, 0.0)
    pc_before[np.isnan(before)] = np.nan
    pc_within[np.isnan(within)] = np.nan
    return EquivalentErasureTable(before, within, pc_before, pc_within, scheme)
