import math

import numpy as np
import pytest

from polydet.connection import build_connection, make_punctures, scale_punctures
from polydet.geometry import build_graph, make_region
from polydet.spectral import assemble, heat_kernel_diagonal, heat_trace
from polydet.walker import (change_distance, decay_envelope, domain_change_decay, free_return_prob,
                            mc_dirichlet_kernel, mc_heat_trace, scaled_i0, simulate_free_walk)


def _within(est, exact, k=3.0):
    return abs(est.mean - exact) <= k * est.stderr + 1e-12


def test_free_return_prob_limits():
    assert free_return_prob(0) == 1.0
    t = 1e3
    assert abs(t * free_return_prob(t) * 4 * math.pi - 1) < 0.01
    with pytest.raises(ValueError):
        free_return_prob(-1)


def test_scaled_i0_branch_continuity():
    from scipy.special import ive
    for x in (1e5, 9.99e5, 1.0e6):
        r = 1 / (8 * x)
        series = (1 + r * (1 + r * (4.5 + 37.5 * r))) / math.sqrt(2 * math.pi * x)
        assert series == pytest.approx(float(ive(0, x)), rel=1e-12)
    assert np.isfinite(scaled_i0(1e14))


def test_free_return_mc():
    t = 5.0
    finals, _, _ = simulate_free_walk(t, 1_000_000, seed=7)
    hit = (finals == 0).all(axis=1).astype(float)
    se = hit.std(ddof=1) / math.sqrt(hit.size)
    assert abs(hit.mean() - free_return_prob(t)) < 3 * se


def test_jump_counts_independent():
    _, jx, jy = simulate_free_walk(1.5, 1_000_000, seed=3)
    assert abs(np.corrcoef(jx, jy)[0, 1]) < 0.01
    # each coordinate is a rate-2 walk
    assert jx.mean() == pytest.approx(3.0, rel=0.01)


def test_single_vertex(square):
    g = build_graph(square.scaled(2))
    est = mc_dirichlet_kernel(g, None, (1, 1), 0.3, 100_000, seed=1)
    assert _within(est, math.exp(-1.2))


def test_grid_and_annulus_against_dense(square, holed):
    g = build_graph(square.scaled(3))
    exact = heat_kernel_diagonal(assemble(g), 0.5)
    est = mc_dirichlet_kernel(g, None, (1, 1), 0.5, 100_000, seed=2)
    assert _within(est, exact[g.vertex_id((1, 1))])

    ga = build_graph(holed.scaled(2))
    conn = build_connection(ga, scale_punctures(holed, [(7, 7)], 2))
    exact = heat_kernel_diagonal(assemble(ga, conn), 2.0)
    for p in ((3, 3), (9, 5), (6, 10)):
        est = mc_dirichlet_kernel(ga, conn, p, 2.0, 100_000, seed=p[0])
        assert _within(est, exact[ga.vertex_id(p)])


def test_not_a_vertex(square):
    g = build_graph(square.scaled(3))
    with pytest.raises(ValueError):
        mc_dirichlet_kernel(g, None, (0, 0), 1.0, 10)
    with pytest.raises(ValueError):
        mc_dirichlet_kernel(g, None, (1, 1), 1.0, 0)


def test_reproducible(l_shape):
    g = build_graph(l_shape.scaled(3))
    a = mc_dirichlet_kernel(g, None, (1, 1), 1.0, 20_000, seed=9)
    b = mc_dirichlet_kernel(g, None, (1, 1), 1.0, 20_000, seed=9)
    c = mc_dirichlet_kernel(g, None, (1, 1), 1.0, 20_000, seed=10)
    assert a == b
    assert a.mean != c.mean


def test_heat_trace_mc(square, holed):
    g = build_graph(square.scaled(6))
    assert mc_heat_trace(g, None, 0.0, 10).mean == g.n
    est = mc_heat_trace(g, None, 1.0, 20_000, seed=4)
    assert _within(est, heat_trace(assemble(g), 1.0).value)

    ga = build_graph(holed.scaled(2))
    tw = build_connection(ga, scale_punctures(holed, [(7, 7)], 2))
    plain = mc_heat_trace(ga, None, 3.0, 5_000, seed=5)
    twisted = mc_heat_trace(ga, tw, 3.0, 5_000, seed=5)
    assert abs(twisted.mean) <= plain.mean


def test_envelope_pieces():
    R = 100.0
    assert decay_envelope(R, 0.5) == pytest.approx(0.5 * math.exp(-R))
    assert decay_envelope(R, 2.0) == pytest.approx(math.exp(-R) / 2)
    t = R / (4 * math.e ** 2) + 1
    assert decay_envelope(R, t) == pytest.approx(math.exp(-R * R / (8 * t)) / t)


def test_domain_change_identical(square):
    g = build_graph(square.scaled(10))
    rows, c_hat = domain_change_decay(g, g, None, None, (5, 5), [0.5, 1.0], 5_000, seed=1)
    assert all(r[1] == 0 for r in rows)
    assert c_hat == 0


def _centered(side, total):
    lo, hi = (total - side) // 2, (total + side) // 2
    return make_region([[(lo, lo), (hi, lo), (hi, hi), (lo, hi)]])


def test_domain_change_nested_squares():
    inner, outer = _centered(12, 16), _centered(16, 16)
    ga, gb = build_graph(inner), build_graph(outer)
    x = (8, 8)
    assert change_distance(inner, outer, x) == 6
    rows, c_hat = domain_change_decay(ga, gb, None, None, x, [0.5, 1, 2, 4], 200_000, seed=3)
    assert math.isfinite(c_hat) and c_hat > 0
    for t, diff, se, env, ratio in rows:
        assert abs(diff) <= c_hat * env * (1 + 1e-12)
    # the outer domain contains the inner one, so its kernel is larger
    assert all(r[1] <= 0 for r in rows)
    assert rows[-1][1] < rows[0][1]


def test_domain_change_sigma_only():
    base = make_region([[(0, 0), (16, 0), (16, 16), (0, 16)], [(13, 13), (14, 13), (14, 14), (13, 14)]])
    g = build_graph(base)
    tw = build_connection(g, make_punctures(base, [(27, 27)]))
    x = (4, 4)
    R = change_distance(base, base, x, (), [(27, 27)])
    assert R == pytest.approx(math.hypot(9.5, 9.5))
    rows, c_hat = domain_change_decay(g, g, None, tw, x, [1, 4, 16], 100_000, seed=2)
    assert math.isfinite(c_hat)
    assert all(abs(r[1]) <= c_hat * r[3] * (1 + 1e-12) for r in rows)
