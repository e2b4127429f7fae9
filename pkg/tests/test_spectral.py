import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from polydet.connection import build_connection, scale_punctures
from polydet.geometry import build_graph, make_region
from polydet.spectral import (NotPositiveDefinite, SymmetricOperator, assemble, dense_spectrum,
                              discrete_zeta_prime_zero, heat_kernel_diagonal, heat_trace,
                              ldl_pivots, logdet, slq_trace)
from polydet.validation import (TREE_DOMAINS, bareiss_det, gauge_logdets, spanning_tree_count,
                                square_spectrum_logdet)

from conftest import HOLED, L_SHAPE, SQUARE


def test_single_vertex(square):
    op = assemble(build_graph(square.scaled(2)))
    assert op.matrix.toarray().tolist() == [[4.0]]
    assert logdet(op) == pytest.approx(math.log(4), abs=1e-15)
    assert dense_spectrum(op).tolist() == [4.0]
    assert heat_trace(op, 0.7).value == pytest.approx(math.exp(-2.8))


def test_two_by_two_grid(square):
    op = assemble(build_graph(square.scaled(3)))
    M = op.matrix.toarray()
    assert np.all(np.diag(M) == 4)
    assert (M == -1).sum() == 8
    assert np.allclose(dense_spectrum(op), [2, 4, 4, 6])
    assert abs(logdet(op) - math.log(192)) < 1e-12
    t = 0.3
    expect = math.exp(-2 * t) + 2 * math.exp(-4 * t) + math.exp(-6 * t)
    assert heat_trace(op, t).value == pytest.approx(expect, rel=1e-14)
    assert heat_trace(op, 0).value == 4


def test_square_eleven_against_exact_spectrum(square):
    op = assemble(build_graph(square.scaled(11)))
    assert abs(logdet(op) - square_spectrum_logdet(11)) < 1e-10


@pytest.mark.parametrize("L", [4, 17, 40])
def test_large_square_relative_accuracy(square, L):
    got = logdet(assemble(build_graph(square.scaled(L))))
    ref = square_spectrum_logdet(L)
    assert abs(got - ref) / ref < 1e-12


def test_twisted_structure(holed):
    g = build_graph(holed.scaled(2))
    conn = build_connection(g, scale_punctures(holed, [(7, 7)], 2))
    M = assemble(g, conn).matrix.toarray()
    flipped = {tuple(g.edges[k]) for k in np.flatnonzero(conn.edge_signs < 0)}
    assert flipped
    for i, j in g.edges:
        expect = 1.0 if (i, j) in flipped else -1.0
        assert M[i, j] == M[j, i] == expect


def test_mismatched_graph_rejected(square):
    g1 = build_graph(square.scaled(3))
    g2 = build_graph(square.scaled(4))
    with pytest.raises(ValueError, match="different graph"):
        assemble(g2, build_connection(g1))


def test_not_positive_definite():
    op = SymmetricOperator(sp.csc_matrix(np.array([[1.0, 2.0], [2.0, 1.0]])))
    with pytest.raises(NotPositiveDefinite):
        ldl_pivots(op)


def test_dense_threshold(square):
    op = assemble(build_graph(square.scaled(6)))
    with pytest.raises(ValueError, match="threshold"):
        dense_spectrum(op, threshold=10)


def test_gauge_invariance():
    vals = np.array(list(gauge_logdets(L=6, seed=2).values()))
    assert len(vals) == 5
    assert (vals.max() - vals.min()) / abs(vals.mean()) < 1e-10


def test_bareiss():
    assert bareiss_det([[2, 1], [1, 2]]) == 3
    assert bareiss_det([[0, 1], [1, 0]]) == -1
    M = np.random.default_rng(0).integers(-5, 6, size=(6, 6))
    assert bareiss_det(M) == round(np.linalg.det(M))


@pytest.mark.parametrize("name", sorted(TREE_DOMAINS))
def test_matrix_tree(name):
    loops, s = TREE_DOMAINS[name]
    g = build_graph(make_region(loops).scaled(s))
    assert g.n <= 12
    assert round(math.exp(logdet(assemble(g)))) == spanning_tree_count(g)


def _instances():
    out = []
    for loops, L, sig in ((SQUARE, 6, None), (L_SHAPE, 4, None), (HOLED, 2, [(7, 7)]),
                          (HOLED, 1, [(7, 7)]), ([[(0, 0), (6, 0), (0, 6)]], 2, None)):
        r = make_region(loops)
        g = build_graph(r.scaled(L))
        conn = build_connection(g, scale_punctures(r, sig, L) if sig else None)
        out.append(assemble(g, conn))
    return out


def test_zeta_examples():
    assert abs(discrete_zeta_prime_zero([1.0])) < 1e-12
    assert discrete_zeta_prime_zero([math.e]) == pytest.approx(-1, abs=1e-10)
    assert discrete_zeta_prime_zero([2, 4, 4, 6]) == pytest.approx(-math.log(192), abs=1e-8)
    with pytest.raises(ValueError):
        discrete_zeta_prime_zero([0.0, 1.0])


@pytest.mark.parametrize("k", range(5))
def test_zeta_identity(k):
    op = _instances()[k]
    assert abs(discrete_zeta_prime_zero(dense_spectrum(op)) + logdet(op)) < 1e-8


def test_eigenvalue_range_random_domains():
    rng = np.random.default_rng(4)
    for _ in range(20):
        w, h = rng.integers(1, 4, size=2)
        L = int(rng.integers(2, 7))
        loops = [[(0, 0), (int(w), 0), (int(w), int(h)), (0, int(h))]]
        r = make_region(loops)
        g = build_graph(r.scaled(L))
        mu = dense_spectrum(assemble(g))
        assert mu.min() > 0 and mu.max() < 8
    for op in _instances():
        mu = dense_spectrum(op)
        assert mu.min() > 0 and mu.max() < 8


def test_heat_trace_monotone_convex_and_twist_dominated(holed):
    g = build_graph(holed.scaled(2))
    plain = assemble(g)
    twisted = assemble(g, build_connection(g, scale_punctures(holed, [(7, 7)], 2)))
    ts = np.linspace(0.05, 6, 60)
    tr = np.array([heat_trace(plain, t).value for t in ts])
    tw = np.array([heat_trace(twisted, t).value for t in ts])
    assert np.all(np.diff(tr) < 0)
    assert np.all(np.diff(tr, 2) > 0)
    assert np.all(tr <= g.n) and np.all(tr > 0)
    assert np.all(np.abs(tw) <= tr + 1e-12)


def test_kernel_diagonal_sums_to_trace(l_shape):
    op = assemble(build_graph(l_shape.scaled(3)))
    assert heat_kernel_diagonal(op, 0.8).sum() == pytest.approx(heat_trace(op, 0.8).value, rel=1e-12)


def test_slq_against_dense(square):
    op = assemble(build_graph(square.scaled(20)))
    exact = heat_trace(op, 0.5).value
    mean, se = slq_trace(op.matrix, lambda x: np.exp(-0.5 * x), probes=200, steps=30, seed=1)
    assert abs(mean - exact) < 4 * se + 1e-3 * exact
    p = heat_trace(op, 0.5, threshold=100, probes=50, seed=1)
    assert p.method == "slq" and p.stderr > 0


@settings(max_examples=25, deadline=None)
@given(w=st.integers(1, 3), h=st.integers(1, 3), L=st.integers(2, 6))
def test_logdet_matches_dense(w, h, L):
    r = make_region([[(0, 0), (w, 0), (w, h), (0, h)]])
    g = build_graph(r.scaled(L))
    op = assemble(g)
    assert logdet(op) == pytest.approx(np.log(dense_spectrum(op)).sum(), rel=1e-12, abs=1e-12)
