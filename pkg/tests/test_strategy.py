import math

import pytest

from emwrc.errors import SchemeMismatch, TooFewUsers
from emwrc.strategy import Schedule, Scheme, apply_schedule, build_matrix, next_schedule


def test_matrices():
    assert build_matrix("oppwr", 3).to_lists() == ["110", "011", "101"]
    assert build_matrix("mpwr", 4).to_lists() == ["1100", "0110", "0011"]
    assert build_matrix("owr", 2).to_lists() == ["10", "01"]


def test_too_few_users():
    with pytest.raises(TooFewUsers):
        build_matrix(Scheme.MPWR, 1)


def test_scheme_parse():
    assert Scheme.parse("OPPWR") is Scheme.OPPWR
    with pytest.raises(ValueError):
        Scheme.parse("nope")


@pytest.mark.parametrize("n", range(2, 33))
def test_column_weights(n):
    assert build_matrix("owr", n).column_weights() == [1] * n
    w = build_matrix("mpwr", n).column_weights()
    assert w[0] == w[-1] == 1 and all(x == 2 for x in w[1:-1])
    assert build_matrix("oppwr", n).column_weights() == [2] * n
    for s in Scheme:
        assert build_matrix(s, n).n_slots == s.slots(n)


def test_oppwr_circulant():
    rows = build_matrix("oppwr", 6).rows
    for a, b in zip(rows, rows[1:]):
        assert b == ((a << 1) | (a >> 5)) & 0b111111


def test_identity_schedule():
    assert next_schedule(9, 4, 5, False).permutation == (0, 1, 2, 3, 4)


def test_schedule_deterministic():
    assert next_schedule(11, 7, 6, True) == next_schedule(11, 7, 6, True)
    perms = {next_schedule(11, r, 6, True).permutation for r in range(20)}
    assert len(perms) > 1


def test_schedule_validation():
    with pytest.raises(ValueError):
        Schedule((0, 0, 1), 0)


def test_apply_schedule_example():
    # positions (2,3,1) in 1-based user labels
    out = apply_schedule(build_matrix("mpwr", 3), Schedule((1, 2, 0), 0))
    assert out.to_lists() == ["011", "101"]


def test_apply_identity_and_owr():
    A = build_matrix("oppwr", 4)
    assert apply_schedule(A, Schedule((0, 1, 2, 3), 0)) == A
    with pytest.raises(SchemeMismatch):
        apply_schedule(build_matrix("owr", 3), Schedule((1, 0, 2), 0))


@pytest.mark.parametrize("scheme", ["mpwr", "oppwr"])
def test_apply_preserves_weights(scheme):
    A = build_matrix(scheme, 7)
    for r in range(50):
        B = apply_schedule(A, next_schedule(3, r, 7, True))
        assert B.n_slots == A.n_slots and all(row.bit_count() == 2 for row in B.rows)
        assert sorted(B.column_weights()) == sorted(A.column_weights())


def test_adjacency_frequency():
    # an ordered pair sits next to each other (either order) with probability 2/N
    n, rounds = 5, 100_000
    hits = 0
    for r in range(rounds):
        p = next_schedule(123, r, n, True).permutation
        k = p.index(0)
        if (k > 0 and p[k - 1] == 1) or (k < n - 1 and p[k + 1] == 1):
            hits += 1
    q = 2 / n
    assert abs(hits / rounds - q) <= 3 * math.sqrt(q * (1 - q) / rounds)
