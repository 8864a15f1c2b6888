import math

import numpy as np
import pytest

from oracles import nb_walk_count, walk_count
from specglauber.harness import complete, complete_bipartite, corpus, cycle, path, petersen
from specglauber.spectral import (ReducibleError, SpectralError, adjacency_matrix, backtrack_bound,
                                  check_eigenvector_relations, check_pt_invariance, genus_offset,
                                  genus_rho_bound, hashimoto_irreducible, hashimoto_matrix, jacobi_eigh,
                                  perron, planar_rho_bound, spectral_radius, strong_components,
                                  symmetric_eigvals, weak_normality)

ALL = corpus("all")


def test_adjacency_examples():
    assert adjacency_matrix(path(2)).entries.tolist() == [[0, 1], [1, 0]]
    assert np.array_equal(adjacency_matrix(complete(4)).entries, np.ones((4, 4)) - np.eye(4))
    assert adjacency_matrix(path(3)).entries.tolist() == [[0, 1, 0], [1, 0, 1], [0, 1, 0]]


def test_hashimoto_examples():
    assert not hashimoto_matrix(path(2)).entries.any()
    h = hashimoto_matrix(complete(4))
    assert h.entries.shape == (12, 12) and (h.entries.sum(axis=1) == 2).all()
    h = hashimoto_matrix(path(3))
    nz = {(h.row_labels[i], h.col_labels[j]) for i, j in zip(*np.nonzero(h.entries))}
    assert nz == {((0, 1), (1, 2)), ((2, 1), (1, 0))}


def test_perron_examples():
    assert perron(adjacency_matrix(complete(4))).radius == pytest.approx(3, abs=1e-12)
    assert perron(adjacency_matrix(path(3))).radius == pytest.approx(math.sqrt(2), abs=1e-10)
    assert perron(hashimoto_matrix(complete(4))).radius == pytest.approx(2, abs=1e-12)


def test_perron_vectors_positive_and_normalised():
    for g in ALL:
        res = perron(adjacency_matrix(g))
        a = adjacency_matrix(g).entries
        assert (res.right_vec > 0).all() and (res.left_vec > 0).all()
        assert res.right_vec.sum() == pytest.approx(1.0)
        assert np.abs(a @ res.right_vec - res.radius * res.right_vec).max() <= 1e-10


def test_perron_reducible_error():
    with pytest.raises(ReducibleError) as exc:
        perron(hashimoto_matrix(cycle(4)))
    assert len(exc.value.components) == 2
    with pytest.raises(SpectralError):
        perron(np.array([[0.0, -1.0], [1.0, 0.0]]))


def test_perron_matches_dense_eigensolver():
    for g in ALL:
        for m in (adjacency_matrix(g).entries, hashimoto_matrix(g).entries):
            if m.shape[0] > 40:
                continue
            oracle = float(np.max(np.abs(np.linalg.eigvals(m))))
            assert spectral_radius(m) == pytest.approx(oracle, abs=1e-8)


def test_hashimoto_irreducible_examples():
    assert not hashimoto_irreducible(cycle(4))
    assert hashimoto_irreducible(complete(4))
    assert not hashimoto_irreducible(path(3))


def test_strong_components_against_reachability():
    rng = np.random.default_rng(1)
    for _ in range(20):
        a = rng.random((9, 9)) < 0.2
        reach = np.eye(9, dtype=bool) | a
        for _ in range(9):
            reach = reach | ((reach.astype(int) @ reach.astype(int)) > 0)
        comps = strong_components(a)
        label = {v: i for i, c in enumerate(comps) for v in c}
        for u in range(9):
            for v in range(9):
                assert (label[u] == label[v]) == (reach[u, v] and reach[v, u])


def test_weak_normality_examples():
    assert weak_normality(complete(4)) == pytest.approx(1.0, abs=1e-9)
    c = weak_normality(complete_bipartite(2, 3))
    assert math.isfinite(c) and c > 0
    with pytest.raises(ReducibleError):
        weak_normality(cycle(5))


def test_pt_invariance_examples_and_oracle():
    assert check_pt_invariance(complete(4), 6)
    assert check_pt_invariance(path(3), 4)
    assert check_pt_invariance(petersen(), 5)
    g = complete_bipartite(2, 3)
    h = hashimoto_matrix(g)
    hk = np.linalg.matrix_power(h.entries.astype(np.int64), 3)
    for i, e in enumerate(h.row_labels):
        for j, f in enumerate(h.col_labels):
            assert hk[i, j] == nb_walk_count(g, e, f, 3)


def test_walk_counts_match_adjacency_powers():
    for g in corpus(["path(4)", "complete(4)", "grid(2,3)", "cycle_with_chord(5)"]):
        adj = {v: g.adjacency[v] for v in range(g.n)}
        a = adjacency_matrix(g).entries.astype(np.int64)
        for ell in range(6):
            p = np.linalg.matrix_power(a, ell)
            for u in range(g.n):
                for w in range(g.n):
                    assert p[u, w] == walk_count(adj, u, w, ell)


def test_eigenvector_relations_examples():
    for g in (complete(4), complete_bipartite(2, 3), complete(5)):
        assert check_eigenvector_relations(g).max_violation <= 1e-8
    with pytest.raises(ReducibleError):
        check_eigenvector_relations(cycle(4))


def test_backtrack_bound():
    rep = backtrack_bound(complete(4))
    # least return e -> e^-1 in K4 takes four non-backtracking steps (via a triangle)
    assert {e.ell for e in rep.edges} == {4}
    assert rep.min_slack_stated >= 0 and rep.min_slack_path >= 0
    rep = backtrack_bound(complete_bipartite(2, 3))
    assert not rep.missing and rep.min_slack_stated >= -1e-9
    with pytest.raises(ReducibleError):
        backtrack_bound(cycle(4))


def test_planar_bound():
    assert planar_rho_bound(5) == 5
    assert planar_rho_bound(6) == 6
    assert planar_rho_bound(36) == pytest.approx(math.sqrt(396))
    assert planar_rho_bound(37) == pytest.approx(math.sqrt(8 * 37 - 16) + 2 * math.sqrt(3))


def test_genus_bound():
    assert genus_rho_bound(50, 0) == pytest.approx(math.sqrt(320) + 10, abs=1e-12)
    assert genus_rho_bound(11, 0) is None
    assert genus_rho_bound(100, 6) == pytest.approx(math.sqrt(8 * 84) + 16)
    assert [genus_offset(g) for g in (0, 1, 2, 3, 4, 5, 6, 7)] == [10, 10, 12, 12, 14, 16, 16, 18]


def test_jacobi_against_lapack():
    rng = np.random.default_rng(0)
    for n in (1, 2, 5, 8, 17, 40):
        a = rng.normal(size=(n, n))
        a = a + a.T
        w, v = jacobi_eigh(a)
        assert np.allclose(w, np.linalg.eigvalsh(a), atol=1e-10)
        assert np.abs(a @ v - v * w).max() <= 1e-12
        assert np.abs(v.T @ v - np.eye(n)).max() <= 1e-12
    big = rng.normal(size=(170, 170))
    assert np.allclose(symmetric_eigvals(big + big.T), np.linalg.eigvalsh(big + big.T))
