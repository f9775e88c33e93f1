import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from emwrc import analytics as an
from emwrc import oracle
from emwrc.channel import ErasureProfile
from emwrc.errors import DomainError, SchemeMismatch
from emwrc.strategy import Scheme

from fixtures import MPWR4_EXACT, grid_profiles


def sym(n, u, d):
    return ErasureProfile.symmetric(n, u, d)


def test_owr_closed_form():
    m = an.eeer("owr", sym(4, 0.1, 0.1))
    off = m.off_diagonal()
    assert np.all(np.abs(off - 0.19) < 1e-15)
    assert an.overhead_prediction(m.max) == pytest.approx(0.19 / 0.81, abs=1e-12)


def test_owr_asymmetric():
    p = ErasureProfile([0.1, 0.2, 0.0], [0.3, 0.0, 0.5])
    m = an.eeer_owr(p)
    assert m.eps[1, 0] == pytest.approx(1 - 0.8 * 0.7)
    assert m.eps[0, 2] == pytest.approx(1 - 0.9 * 0.5)


def test_pairwise_rejects_owr():
    with pytest.raises(SchemeMismatch):
        an.recursion_state("owr", sym(3, 0.1, 0.1))
    with pytest.raises(SchemeMismatch):
        an.equivalent_uplink("owr", sym(3, 0.1, 0.1))


def test_mpwr_fixture():
    np.testing.assert_allclose(an.eeer("mpwr", sym(4, 0.1, 0.1)).eps, MPWR4_EXACT, atol=1e-12)


@pytest.mark.parametrize("scheme", ["mpwr", "oppwr"])
@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_corrected_recursions_match_enumeration(scheme, n):
    for p in grid_profiles(n):
        dev = np.abs(an.eeer(scheme, p).eps - oracle.exact_eeer(scheme, p).eps).max()
        assert dev <= 1e-9


def test_verbatim_variant_is_rejected():
    p = sym(4, 0.1, 0.1)
    ex = oracle.exact_eeer("mpwr", p).eps
    assert np.abs(an.eeer("mpwr", p, variant="verbatim").eps - ex).max() > 0.1
    q = grid_profiles(4)[-1]
    ex = oracle.exact_eeer("oppwr", q).eps
    assert np.abs(an.eeer("oppwr", q, variant="verbatim").eps - ex).max() > 1e-3
    with pytest.raises(ValueError):
        an.eeer("mpwr", p, variant="other")


@pytest.mark.parametrize("n", range(3, 11))
def test_mpwr_max_is_end_to_end(n):
    p = sym(n, 0.1, 0.1)
    m = an.eeer_mpwr(p)
    (users, state), = an.recursion_state("mpwr", p, 0)
    assert m.max == pytest.approx(1 - state.P[-1], abs=1e-15)
    assert len(set(np.round(m.off_diagonal(), 12))) > 1


@pytest.mark.parametrize("n", range(3, 11))
def test_oppwr_argmax_offset(n):
    m = an.eeer_oppwr(sym(n, 0.1, 0.1))
    # 0-based offset N // 2 is the 1-based user N // 2 + 1 seen from user 1
    assert int(np.argmax(m.eps[:, 0])) == n // 2


def test_pc_is_product_of_directions():
    p = ErasureProfile([0.1, 0.3, 0.05, 0.2, 0.15], [0.1, 0.2, 0.0, 0.3, 0.05])
    for users, s in an.recursion_state("oppwr", p, 2):
        np.testing.assert_allclose(s.Pc[1:], (s.P1 * s.P2)[1:], atol=1e-15)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 6), st.integers(0, 5),
       st.lists(st.floats(0, 0.6), min_size=12, max_size=12))
def test_oppwr_rotation_equivariance(n, shift, vals):
    p = ErasureProfile(vals[:n], vals[6:6 + n])
    m = an.eeer_oppwr(p).eps
    r = an.eeer_oppwr(p.rotated(shift)).eps
    idx = [(k + shift) % n for k in range(n)]
    np.testing.assert_allclose(r, m[np.ix_(idx, idx)], atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(["mpwr", "oppwr"]), st.integers(2, 6),
       st.lists(st.floats(0, 0.6), min_size=12, max_size=12), st.integers(0, 5))
def test_monotone_in_own_uplink_and_destination_downlink(scheme, n, vals, k):
    k %= n
    p = ErasureProfile(vals[:n], vals[6:6 + n])
    base = an.eeer(scheme, p).eps
    up = list(p.eps_up)
    up[k] = min(1.0, up[k] + 0.1)
    d_up = an.eeer(scheme, ErasureProfile(up, p.eps_down)).eps - base
    assert np.all(d_up[k, :] >= -1e-12)
    down = list(p.eps_down)
    down[k] = min(1.0, down[k] + 0.1)
    d_down = an.eeer(scheme, ErasureProfile(p.eps_up, down)).eps - base
    assert np.all(d_down[:, k] >= -1e-12)
    assert np.allclose(np.delete(d_down, k, axis=1), 0.0, atol=1e-12)


def test_not_monotone_in_neighbour_uplink():
    # losing x1 in the first slot leaves x2 alone in that row, which helps user 3
    a = an.eeer("mpwr", ErasureProfile([0.1, 0.1, 0.1], [0.1, 0.1, 0.1])).eps[1, 2]
    b = an.eeer("mpwr", ErasureProfile([0.3, 0.1, 0.1], [0.1, 0.1, 0.1])).eps[1, 2]
    assert b < a


def test_equivalent_uplink_shapes():
    t = an.equivalent_uplink("mpwr", sym(5, 0.1, 0.1))
    assert np.isnan(t.before[0]) and np.isnan(t.within[-1])
    assert np.all(t.before[1:] <= 0.1) and np.all(t.within[:-1] <= 0.1)
    t = an.equivalent_uplink("oppwr", sym(5, 0.1, 0.1))
    assert np.all(t.before < 0.1) and np.all(t.within < 0.1)


def test_mpwr_two_users_reconstruction_changes_nothing():
    p = sym(2, 0.2, 0.1)
    assert np.allclose(an.eeer("mpwr", p, True).eps, an.eeer("mpwr", p).eps)
    t = an.equivalent_uplink("mpwr", p)
    assert t.within[0] == pytest.approx(0.2) and t.before[1] == pytest.approx(0.2)


def test_oppwr_two_users_reconstruction_helps():
    p = sym(2, 0.2, 0.1)
    assert an.eeer("oppwr", p, True).max < an.eeer("oppwr", p).max


@pytest.mark.parametrize("n", range(2, 17))
def test_lossless_rates(n):
    p = sym(n, 0.0, 0.0)
    assert an.rate_upper_bound(p) == 1 / (n - 1)
    assert an.normalized_rate("mpwr", an.eeer("mpwr", p).max, n) == 1 / (n - 1)
    assert an.normalized_rate("owr", an.eeer("owr", p).max, n) == 1 / n
    assert an.normalized_rate("oppwr", an.eeer("oppwr", p).max, n) == 1 / n


def test_rate_bound_terms():
    # downlink term binds
    p = ErasureProfile([0.0, 0.0, 0.0], [0.0, 0.5, 0.0])
    assert an.rate_upper_bound(p) == pytest.approx(0.25)
    # per-user uplink term binds
    p = ErasureProfile([0.9, 0.0, 0.0], [0.0, 0.0, 0.0])
    assert an.rate_upper_bound(p) == pytest.approx(0.1)


def test_domain_errors():
    with pytest.raises(DomainError):
        an.overhead_prediction(1.0)
    with pytest.raises(DomainError):
        an.normalized_rate("owr", 1.5, 3)


def test_average_is_mean_off_diagonal():
    m = an.eeer("mpwr", sym(5, 0.1, 0.2))
    assert an.average_eeer(m) == pytest.approx(m.off_diagonal().mean())


def test_best_scheme_sequence():
    res = an.best_scheme_by_rate(lambda n: sym(n, 0.1, 0.1), range(2, 17))
    seq = [s for _, s, _ in res]
    order = {Scheme.MPWR: 0, Scheme.OPPWR: 1, Scheme.OWR: 2}
    assert all(order[a] <= order[b] for a, b in zip(seq, seq[1:]))
    assert seq[0] is Scheme.MPWR and seq[-1] is Scheme.OWR
