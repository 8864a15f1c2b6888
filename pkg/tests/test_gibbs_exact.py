import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import gibbs_table, influence_oracle
from specglauber.gibbs_exact import (EMPTY, Boundary, EmptySupportError, GibbsError, GibbsParams,
                                     enumerate_gibbs, extended_influence_exact, extended_matrices,
                                     gibbs_weight, influence_matrix_exact, marginal_boundedness, n_matrix,
                                     partition_and_marginals, random_boundary, symmetrize_check,
                                     total_connectivity_check)
from specglauber.harness import complete, corpus, cycle, cycle_with_chord, path

EDGE = path(2)


def test_params_invariants():
    assert GibbsParams.ising(0.5).antiferromagnetic
    assert GibbsParams.ising(2).ferromagnetic
    assert GibbsParams.hardcore(1).hard
    with pytest.raises(GibbsError):
        GibbsParams(0.5, 0.7, 1.0, "ising")
    with pytest.raises(GibbsError):
        GibbsParams(0.1, 1.0, 1.0, "hardcore")
    with pytest.raises(GibbsError):
        GibbsParams(1.0, 0.0, 1.0)


def test_gibbs_weight_examples():
    assert gibbs_weight(EDGE, GibbsParams.ising(0.5), (1, 1)) == 0.5
    assert gibbs_weight(EDGE, GibbsParams.hardcore(1), (1, 1)) == 0
    assert gibbs_weight(EDGE, GibbsParams.hardcore(2), (1, -1)) == 2


def test_marginal_examples():
    r = partition_and_marginals(EDGE, GibbsParams.hardcore(1))
    assert r["marginals"][0] == pytest.approx(1 / 3)
    assert r["Z"] == pytest.approx(3)
    r = partition_and_marginals(EDGE, GibbsParams.ising(0.5))
    assert r["marginals"][0] == pytest.approx(0.5)
    r = partition_and_marginals(EDGE, GibbsParams.hardcore(1), Boundary(((1, 1),)))
    assert r["marginals"][0] == 0


def test_empty_support_and_cap():
    with pytest.raises(EmptySupportError):
        enumerate_gibbs(EDGE, GibbsParams.hardcore(1), Boundary(((0, 1), (1, 1))))
    with pytest.raises(GibbsError):
        enumerate_gibbs(path(5), GibbsParams.ising(0.5), EMPTY, cap=3)


@pytest.mark.parametrize("g", [path(4), cycle(4), complete(4), cycle_with_chord(5)])
@pytest.mark.parametrize("params", [(0.5, 0.5, 1.0), (0.0, 1.0, 0.7), (0.3, 1.5, 2.0), (2.0, 2.0, 1.0)])
def test_enumeration_against_weight_table(g, params):
    beta, gamma, lam = params
    p = GibbsParams(beta, gamma, lam)
    table = gibbs_table(g, beta, gamma, lam)
    z = sum(table.values())
    en = enumerate_gibbs(g, p)
    assert math.exp(en.log_z) == pytest.approx(z, rel=1e-12)
    marg = en.marginals()
    for v in range(g.n):
        assert marg[v] == pytest.approx(sum(w for s, w in table.items() if s[v] == 1) / z, abs=1e-12)


def test_spin_flip_symmetry():
    for g in corpus(["cycle(5)", "grid(2,3)", "complete(4)"]):
        m = partition_and_marginals(g, GibbsParams.ising(0.7))["marginals"]
        assert np.allclose(list(m.values()), 0.5, atol=1e-12)


def test_monotone_conditioning_hardcore():
    g = cycle(5)
    m = partition_and_marginals(g, GibbsParams.hardcore(2.0), Boundary(((1, 1),)))["marginals"]
    assert m[0] == 0 and m[2] == 0


def test_influence_examples():
    i = influence_matrix_exact(EDGE, GibbsParams.ising(0.5)).entries
    assert i[0, 1] == pytest.approx(-1 / 3) and i[1, 0] == pytest.approx(-1 / 3)
    i = influence_matrix_exact(EDGE, GibbsParams.hardcore(1)).entries
    assert i[0, 1] == pytest.approx(-0.5)
    i = influence_matrix_exact(cycle(5), GibbsParams.hardcore(0.3)).entries
    assert np.allclose(np.diag(i), 1)


@pytest.mark.parametrize("g", [path(4), cycle(4), complete(4), cycle_with_chord(5)])
def test_influence_against_oracle(g):
    rng = np.random.default_rng(3)
    for beta, gamma, lam in [(0.5, 0.5, 1.0), (0.0, 1.0, 1.3), (0.4, 1.2, 0.8)]:
        p = GibbsParams(beta, gamma, lam)
        for b in [EMPTY] + [random_boundary(g, p, rng) for _ in range(4)]:
            mine = influence_matrix_exact(g, p, b).entries
            ref = influence_oracle(g, beta, gamma, lam, b.assignment)
            assert np.abs(mine - ref).max() <= 1e-12


def test_symmetrize_examples():
    assert symmetrize_check(EDGE, GibbsParams.ising(0.5)).asymmetry <= 1e-12
    assert symmetrize_check(complete(4), GibbsParams.hardcore(0.5)).asymmetry <= 1e-10
    rep = symmetrize_check(EDGE, GibbsParams.hardcore(1), Boundary(((1, 1),)))
    assert rep.degenerate == [0]


def test_symmetrized_spectrum_matches_dense_eigvals():
    g = cycle_with_chord(6)
    for p in (GibbsParams.hardcore(1.0), GibbsParams.ising(1.6)):
        rep = symmetrize_check(g, p)
        oracle = np.linalg.eigvals(influence_matrix_exact(g, p).entries)
        assert np.abs(oracle.imag).max() <= 1e-10
        assert rep.rho == pytest.approx(np.abs(oracle).max(), abs=1e-10)


def test_marginal_boundedness_examples():
    assert marginal_boundedness(EDGE, GibbsParams.hardcore(1)) == pytest.approx(1 / 3)
    assert marginal_boundedness(EDGE, GibbsParams.ising(0.5)) == pytest.approx(1 / 3)
    vals = [marginal_boundedness(path(3), GibbsParams.hardcore(lam)) for lam in (1.0, 0.5, 0.1, 0.01)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_marginal_boundedness_brute_force():
    g, p = path(3), GibbsParams(0.4, 1.3, 0.9)
    best = 1.0
    for k in range(g.n):
        for region in itertools.combinations(range(g.n), k):
            for spins in itertools.product((-1, 1), repeat=k):
                pins = dict(zip(region, spins))
                tab = gibbs_table(g, 0.4, 1.3, 0.9, pins)
                z = sum(tab.values())
                for u in set(range(g.n)) - set(region):
                    q = sum(w for s, w in tab.items() if s[u] == 1) / z
                    best = min(best, *(x for x in (q, 1 - q) if x > 0))
    assert marginal_boundedness(g, p) == pytest.approx(best)


def test_total_connectivity():
    assert total_connectivity_check(complete(4), GibbsParams.ising(0.5))
    assert total_connectivity_check(complete(4), GibbsParams.hardcore(1))
    assert total_connectivity_check(cycle(5), GibbsParams.hardcore(1))


def test_extended_examples():
    rep = extended_matrices(EDGE, GibbsParams.ising(0.5))
    assert rep.labels == [(0, 1), (1, 0)]
    assert rep.H[0, 0] == 0 and rep.H[1, 1] == 0
    assert rep.H[0, 1] == pytest.approx(-1 / 3)
    h = extended_influence_exact(complete(3), GibbsParams.hardcore(1)).entries
    assert h.shape == (6, 6)
    for w in range(3):
        assert not h[2 * w:2 * w + 2, 2 * w:2 * w + 2].any()
    assert np.abs(h).max() <= 1


def test_n_matrix_bounds():
    p = GibbsParams.hardcore(0.5)
    n = n_matrix(complete(3), p).entries
    b = marginal_boundedness(complete(3), p)
    assert np.isfinite(n).all() and (n >= 0).all() and n.max() <= b ** -4
    # zero entries (u forced in the single-split measure) still reproduce I through H o N
    rep = extended_matrices(complete(3), p)
    i = influence_matrix_exact(complete(3), p).entries
    k = np.kron(np.eye(3), np.ones((1, 2)))
    assert np.abs(np.eye(3) + k @ (rep.H * rep.N) @ k.T - i).max() <= 1e-12


@settings(max_examples=40, deadline=None)
@given(beta=st.floats(0.05, 3), gamma=st.floats(0.2, 3), lam=st.floats(0.05, 5), seed=st.integers(0, 999))
def test_influence_property_diag_and_range(beta, gamma, lam, seed):
    g = cycle_with_chord(5)
    p = GibbsParams(beta, gamma, lam)
    b = random_boundary(g, p, np.random.default_rng(seed))
    i = influence_matrix_exact(g, p, b).entries
    assert np.allclose(np.diag(i), 1) and np.abs(i).max() <= 1 + 1e-12
