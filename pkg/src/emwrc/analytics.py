"""End-to-end erasure rates (EEER), reconstruction-equivalent uplink rates,
the cut-set rate bound, normalized rates and ideal-code overhead.

Indexing is 0-based throughout.  For pairwise schemes row ``l`` of ``A``
joins users ``l`` and ``l + 1`` (the OPPWR wrap row joins ``N - 1`` and
``0``).  Position-dependent uplink rates are kept as two arrays:

* ``before[i]``: erasure probability of ``x_i`` in the row it shares with
  its predecessor (row ``i - 1``),
* ``within[i]``: erasure probability of ``x_i`` in the row it shares with
  its successor (row ``i``).

MPWR has no ``before`` row for user 0 and no ``within`` row for user
``N - 1``; those slots hold NaN.

Recursion variants
------------------
``"corrected"`` is the adopted form.  ``"verbatim"`` keeps two printed
forms for adjudication against the exact oracle: the both-neighbours-present
term of the both-rows probability uses the successor's survival twice, and
the MPWR end-of-chain both-rows term is evaluated with a phantom, always
erased neighbour instead of being zero.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import ErasureProfile
from .errors import DomainError, SchemeMismatch
from .strategy import Scheme

VARIANTS = ("corrected", "verbatim")


@dataclass(frozen=True)
class PairwiseEEERMatrix:
    """``eps[i, j]``: probability that source ``i``'s round packet is lost at ``j``."""

    eps: np.ndarray
    scheme: Scheme
    reconstruction: bool = False

    @property
    def n_users(self) -> int:
        return self.eps.shape[0]

    def off_diagonal(self) -> np.ndarray:
        n = self.n_users
        return self.eps[~np.eye(n, dtype=bool)]

    @property
    def max(self) -> float:
        return float(self.off_diagonal().max())

    @property
    def avg(self) -> float:
        return float(self.off_diagonal().mean())

    @property
    def min(self) -> float:
        return float(self.off_diagonal().min())

    def pairs(self):
        """Yield ``(src, dst, eps)`` over ordered pairs of distinct users."""
        n = self.n_users
        for i in range(n):
            for j in range(n):
                if i != j:
                    yield i, j, float(self.eps[i, j])


@dataclass(frozen=True)
class EquivalentErasureTable:
    """Uplink erasure of each user's coefficient in its two rows after reconstruction."""

    before: np.ndarray
    within: np.ndarray
    pc_before: np.ndarray
    pc_within: np.ndarray
    scheme: Scheme

    def mean_rate(self) -> float:
        return float(np.nanmean(np.concatenate([self.before, self.within])))

    def mean_pc(self) -> float:
        return float(np.nanmean(np.concatenate([self.pc_before, self.pc_within])))


@dataclass(frozen=True)
class RecursionState:
    """Per chain position (0 = destination): found-in-left-row, found-in-right-row,
    found-in-both and found probabilities."""

    P1: np.ndarray
    P2: np.ndarray
    Pc: np.ndarray
    P: np.ndarray


def raw_position_rates(scheme: Scheme, profile: ErasureProfile) -> tuple[np.ndarray, np.ndarray]:
    eps = np.asarray(profile.eps_up, dtype=float)
    before, within = eps.copy(), eps.copy()
    if Scheme.parse(scheme) is Scheme.MPWR:
        before[0] = np.nan
        within[-1] = np.nan
    return before, within


def chain_recursion(before, within, sd: float, closed: bool, variant: str = "corrected") -> RecursionState:
    """Found probabilities along a chain of users hanging off the destination.

    Position 0 is the destination (its packet is known).  The row between
    positions ``k - 1`` and ``k`` carries ``x_{k-1}`` with erasure
    ``within[k - 1]`` and ``x_k`` with erasure ``before[k]``.  With
    ``closed=True`` the chain is a cycle and the last position also shares a
    row with the destination.  ``sd`` is the destination's downlink
    survival probability.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown recursion variant {variant!r}")
    m = len(before)
    eb = np.asarray(before, dtype=float)
    ew = np.asarray(within, dtype=float)
    sb, sw = 1.0 - eb, 1.0 - ew
    P1 = np.zeros(m)
    P2 = np.zeros(m)
    Pc = np.zeros(m)
    P1[0] = P2[0] = Pc[0] = 1.0

    for k in range(1, m):
        P1[k] = sd * (sb[k] * sw[k - 1] * P1[k - 1] + sb[k] * ew[k - 1])

    def right(k):
        # (erasure, survival, found-probability) of the neighbour across row k
        nxt = k + 1
        if nxt == m:
            if closed:
                return eb[0], sb[0], 1.0
            return 1.0, 0.0, 0.0  # nobody there
        return eb[nxt], sb[nxt], P2[nxt]

    for k in range(m - 1, 0, -1):
        if k == m - 1 and not closed:
            P2[k] = 0.0
            continue
        e_n, s_n, p_n = right(k)
        P2[k] = sd * (sw[k] * s_n * p_n + sw[k] * e_n)

    for k in range(1, m):
        at_open_end = k == m - 1 and not closed
        if at_open_end and variant == "corrected":
            Pc[k] = 0.0
            continue
        e_n, s_n, p_n = right(k)
        # own coefficient present in both rows; the printed end-of-chain form squares the left-row survival
        own = sb[k] * sb[k] if at_open_end else sb[k] * sw[k]
        both = s_n * s_n if variant == "verbatim" else sw[k - 1] * s_n
        Pc[k] = sd * sd * own * (
            ew[k - 1] * e_n
            + e_n * sw[k - 1] * P1[k - 1]
            + ew[k - 1] * s_n * p_n
            + both * P1[k - 1] * p_n
        )
    P = P1 + P2 - Pc
    P[0] = 1.0
    return RecursionState(P1, P2, Pc, P)


def _destination_chains(scheme: Scheme, before, within, j: int):
    """Chains rooted at destination ``j`` as (users, before, within, closed)."""
    n = len(before)
    if scheme is Scheme.OPPWR:
        users = [(j + k) % n for k in range(n)]
        return [(users, before[users], within[users], True)]
    chains = []
    right = list(range(j, n))
    if len(right) > 1:
        chains.append((right, before[right], within[right], False))
    left = list(range(j, -1, -1))
    if len(left) > 1:
        # walking leftwards swaps which of a user's rows faces the destination
        chains.append((left, within[left], before[left], False))
    return chains


def _check_pairwise(scheme: Scheme) -> Scheme:
    scheme = Scheme.parse(scheme)
    if scheme is Scheme.OWR:
        raise SchemeMismatch("pairwise recursion requested for OWR")
    return scheme


def recursion_state(scheme, profile: ErasureProfile, destination: int = 0, rates=None,
                    variant: str = "corrected") -> list[tuple[list[int], RecursionState]]:
    scheme = _check_pairwise(scheme)
    before, within = rates if rates is not None else raw_position_rates(scheme, profile)
    before, within = np.asarray(before, float), np.asarray(within, float)
    sd = 1.0 - profile.eps_down[destination]
    return [
        (users, chain_recursion(b, w, sd, closed, variant))
        for users, b, w, closed in _destination_chains(scheme, before, within, destination)
    ]


def _pairwise_eeer(scheme: Scheme, profile: ErasureProfile, rates, variant: str, reconstruction: bool):
    n = profile.n_users
    eps = np.zeros((n, n))
    for j in range(n):
        for users, state in recursion_state(scheme, profile, j, rates, variant):
            for k in range(1, len(users)):
                eps[users[k], j] = 1.0 - state.P[k]
    return PairwiseEEERMatrix(eps, scheme, reconstruction)


def eeer_owr(profile: ErasureProfile) -> PairwiseEEERMatrix:
    su = 1.0 - np.asarray(profile.eps_up)
    sd = 1.0 - np.asarray(profile.eps_down)
    eps = 1.0 - np.outer(su, sd)
    np.fill_diagonal(eps, 0.0)
    return PairwiseEEERMatrix(eps, Scheme.OWR)


def eeer_mpwr(profile: ErasureProfile, rates=None, variant: str = "corrected") -> PairwiseEEERMatrix:
    """MPWR pairwise EEER; ``rates=(before, within)`` switches to position-dependent uplink erasures."""
    return _pairwise_eeer(Scheme.MPWR, profile, rates, variant, rates is not None)


def eeer_oppwr(profile: ErasureProfile, rates=None, variant: str = "corrected") -> PairwiseEEERMatrix:
    return _pairwise_eeer(Scheme.OPPWR, profile, rates, variant, rates is not None)


def equivalent_uplink(scheme, profile: ErasureProfile) -> EquivalentErasureTable:
    """Reconstruction-equivalent uplink erasures from the chain repair sums.

    A coefficient lost in one row is repaired when, walking away through the
    user's other row, the chain of present coefficients ends at a neighbour
    erased in its next row (a singleton equation).
    """
    scheme = _check_pairwise(scheme)
    eps = np.asarray(profile.eps_up, dtype=float)
    s = 1.0 - eps
    n = len(eps)
    pc_before = np.zeros(n)
    pc_within = np.zeros(n)
    for i in range(n):
        if scheme is Scheme.MPWR:
            ahead = range(i + 1, n)          # successors towards the chain end
            behind = range(i - 1, -1, -1)    # predecessors towards the chain start
        else:
            ahead = [(i + t) % n for t in range(1, n)]
            behind = [(i - t) % n for t in range(1, n)]
        pc_before[i] = s[i] * _repair_sum(eps, s, ahead)
        pc_within[i] = s[i] * _repair_sum(eps, s, behind)
    if scheme is Scheme.MPWR:
        pc_before[0] = np.nan
        pc_within[-1] = np.nan
    before = eps * (1.0 - pc_before)
    within = eps * (1.0 - pc_within)
    return EquivalentErasureTable(before, within, pc_before, pc_within, scheme)


def _repair_sum(eps, s, walk) -> float:
    total, run = 0.0, 1.0
    for k in walk:
        total += run * eps[k]
        run *= s[k] * s[k]
    return total


def eeer(scheme, profile: ErasureProfile, reconstruction: bool = False,
         variant: str = "corrected") -> PairwiseEEERMatrix:
    scheme = Scheme.parse(scheme)
    if scheme is Scheme.OWR:
        return eeer_owr(profile)
    rates = None
    if reconstruction:
        table = equivalent_uplink(scheme, profile)
        rates = (table.before, table.within)
    fn = eeer_mpwr if scheme is Scheme.MPWR else eeer_oppwr
    return fn(profile, rates, variant)


def average_eeer(mat: PairwiseEEERMatrix) -> float:
    if mat.n_users < 2:
        raise DomainError("average EEER needs at least two users")
    return mat.avg


def rate_upper_bound(profile: ErasureProfile) -> float:
    """Cut-set bound on the common rate per channel use.

    The per-user multiple-access term is not divided by N - 1 while the
    sum-rate and downlink terms are.
    """
    n = profile.n_users
    if n < 2:
        raise DomainError("rate bound needs at least two users")
    eu = profile.eps_up
    best = math.inf
    for i in range(n):
        others = [eu[j] for j in range(n) if j != i]
        mac = min(1.0 - e for e in others)
        sum_rate = (1.0 - math.prod(others)) / (n - 1)
        down = (1.0 - profile.eps_down[i]) / (n - 1)
        best = min(best, mac, sum_rate, down)
    return best


def normalized_rate(scheme, eeer_max: float, n_users: int) -> float:
    if not 0.0 <= eeer_max <= 1.0:
        raise DomainError(f"EEER {eeer_max} outside [0, 1]")
    return (1.0 - eeer_max) / Scheme.parse(scheme).slots(n_users)


def overhead_prediction(eeer_value: float) -> float:
    """Transmission overhead of an ideal fountain code over an erasure channel."""
    if not 0.0 <= eeer_value < 1.0:
        raise DomainError(f"EEER {eeer_value} outside [0, 1)")
    return eeer_value / (1.0 - eeer_value)


def best_scheme_by_rate(profile_for, n_range, reconstruction: bool = False):
    """For each N, the scheme with the largest normalized rate.

    ``profile_for(n)`` builds the profile for ``n`` users.  Returns a list of
    ``(n, best_scheme, {scheme: rate})``.
    """
    out = []
    for n in n_range:
        profile = profile_for(n)
        rates = {s: normalized_rate(s, eeer(s, profile, reconstruction).max, n) for s in Scheme}
        out.append((n, max(rates, key=rates.get), rates))
    return out
