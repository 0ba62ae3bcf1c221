import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from artifact import permgraph as pg
from artifact.errors import AuxiliarySumNonzero, BudgetExceeded

K8 = pg.Permutation((1, 2, 7, 6, 5, 3, 4, 8))
K8_MATRIX = [
    [1, 0, 0, 0, 0, 0, 0, 0, 0],
    [0, 1, 0, 0, 0, 0, 0, 0, 0],
    [0, 0, 1, 0, 0, 0, 0, 0, 0],
    [0, 0, 1, 0, 0, -1, 1, 0, 0],
    [0, 0, 1, 0, 0, -1, 0, 1, 0],
    [0, 0, 1, 0, -1, 0, 0, 1, 0],
    [0, 0, 1, -1, 0, 0, 0, 1, 0],
    [0, 0, 0, 0, 0, 0, 0, 1, 0],
    [0, 0, 0, 0, 0, 0, 0, 0, 1],
]


def test_parse_and_inverse():
    s = pg.parse_perm("1 2 7 6 5 3 4 8")
    assert s == K8 == pg.parse_perm("(1,2,7,6,5,3,4,8)")
    assert s.inverse().inverse() == s
    assert [s(s.inverse()(i)) for i in range(1, 9)] == list(range(1, 9))
    with pytest.raises(ValueError):
        pg.Permutation((1, 1, 2))


def test_k8_classification():
    c = pg.classify(K8)
    assert c.peaks == {3} and c.valleys == {7}
    assert c.slopes == {5, 8} and c.ladders == {1, 2, 4, 6}
    assert c.ladder_tops == {0, 3, 5} and c.ladder_bottoms == {2, 4, 7}
    assert c.degree == 4
    assert c.covered == {5} and c.uncovered == {8}
    assert c.pivots == {1: 1, 2: 2, 4: 7, 5: 6, 6: 5, 7: 3, 8: 8, 9: 9}
    assert c.valley_alt == {7: 4}


def test_k8_matrix():
    tm = pg.tower_matrix(K8)
    assert tm.entries.tolist() == K8_MATRIX
    assert pg.is_tower_matrix(tm.entries)


def test_k8_pivot_towers_have_length_two():
    tm = pg.tower_matrix(K8)
    c = pg.classify(K8)
    for i in c.slopes | c.valleys:
        col = tm.entries[:, c.pivots[i] - 1]
        assert np.count_nonzero(col) >= 2


def test_identity_and_transposition():
    assert pg.tower_matrix(pg.Permutation.identity(2)).entries.tolist() == np.eye(3, dtype=int).tolist()
    assert pg.tower_matrix(pg.Permutation((2, 1))).entries.tolist() == [[1, 0, 0], [1, -1, 1], [0, 0, 1]]
    c = pg.classify(pg.Permutation.identity(5))
    assert c.ladders == set(range(1, 6)) and c.degree == 0
    assert all(c.pivots[i] == i for i in range(1, 7))
    c = pg.classify(pg.Permutation((2, 1)))
    assert c.peaks == {1} and c.valleys == {2} and not c.ladders and c.degree == 2
    # columns 1 and 2 both end in row 2; column 1 starts higher
    assert c.pivots == {2: 1, 3: 3}
    assert c.valley_alt == {2: 2}


def test_internal_ladders():
    assert pg.internal_ladder_indices(pg.Permutation.identity(3)) == {1, 2, 3}
    assert pg.internal_ladder_indices(pg.Permutation((2, 1))) == frozenset()


@pytest.mark.parametrize("k", range(1, 8))
def test_exhaustive_invariants(k):
    for s in pg.all_permutations(k):
        c = pg.classify(s)
        assert len(c.peaks) == len(c.valleys)
        if s.is_identity():
            assert c.degree == 0
        else:
            assert c.degree >= 2
            assert k - len(pg.internal_ladder_indices(s)) <= 2 * c.degree
        assert len(c.uncovered) <= len(c.valleys)
        parts = [c.peaks, c.valleys, c.ladders, c.slopes]
        assert sum(map(len, parts)) == k
        assert set().union(*parts) == set(range(1, k + 1))
        tm = pg.tower_matrix(s)
        assert pg.is_tower_matrix(tm.entries)
        inv = pg.tower_matrix(s.inverse()).entries
        assert np.array_equal(tm.entries @ inv, np.eye(k + 1, dtype=int))


@pytest.mark.parametrize("k", range(1, 6))
def test_full_unimodularity(k):
    for s in pg.all_permutations(k):
        rep = pg.unimodularity_check(pg.tower_matrix(s), sample=False)
        assert rep.unimodular and rep.inverse_ok and not rep.sampled


def test_unimodularity_counterexample():
    m = np.array([[1, 1, 0], [1, -1, 0], [0, 0, 1]])
    assert round(np.linalg.det(m[:2, :2])) == -2
    rep = pg.unimodularity_check(m)
    assert not rep.unimodular and rep.worst == 2
    assert pg.unimodularity_check(np.eye(4)).unimodular


def test_unimodularity_budget():
    with pytest.raises(BudgetExceeded):
        pg.unimodularity_check(pg.tower_matrix(K8), cap=10, sample=False)
    rep = pg.unimodularity_check(pg.tower_matrix(K8), cap=10, n_samples=2000)
    assert rep.sampled and rep.unimodular


def test_resolve_tilde_identity():
    p = np.random.default_rng(0).normal(size=(4, 3))
    u = np.zeros((3, 3))
    s = pg.Permutation.identity(3)
    assert np.allclose(pg.resolve_tilde(s, p, u, np.zeros(3)), p)
    xi = np.array([0.3, -1.0, 2.0])
    assert np.allclose(pg.resolve_tilde(s, p, u, xi), p - xi)


def test_resolve_tilde_rejects_nonzero_sum():
    with pytest.raises(AuxiliarySumNonzero):
        pg.resolve_tilde(pg.Permutation((2, 1)), np.zeros((3, 3)), np.ones((2, 3)), np.zeros(3))


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 6).flatmap(lambda k: st.tuples(st.permutations(list(range(1, k + 1))),
                                                     st.integers(0, 2**32 - 1))))
def test_resolve_tilde_solves_constraints(data):
    perm, seed = data
    s = pg.Permutation(tuple(perm))
    k = s.k
    rng = np.random.default_rng(seed)
    p = rng.normal(size=(k + 1, 3))
    u = rng.normal(size=(k, 3))
    u -= u.mean(axis=0)
    xi = rng.normal(size=3)
    pt = pg.resolve_tilde(s, p, u, xi)
    assert np.max(np.abs(pg.delta_residuals(s, p, pt, u, xi))) < 1e-12


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 6).flatmap(lambda k: st.permutations(list(range(1, k + 1)))))
def test_degree_matches_ladder_count(perm):
    s = pg.Permutation(tuple(perm))
    c = pg.classify(s)
    assert c.degree == s.k - len(c.ladders)
    assert pg.classify(s.inverse()).degree >= 0
