import logging

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polydet.connection import (build_connection, cycle_monodromy, gauge_transform,
                                make_punctures, random_simple_cycle, scale_punctures,
                                winding_number, winding_parity)
from polydet.geometry import GeometryError, build_graph, make_region
from polydet.validation import monodromy_trials

from conftest import HOLED


def _ring(g, lo, hi):
    """Vertex-index cycle around the square [lo, hi]^2 (counterclockwise)."""
    pts = ([(x, lo) for x in range(lo, hi)] + [(hi, y) for y in range(lo, hi)]
           + [(x, hi) for x in range(hi, lo, -1)] + [(lo, y) for y in range(hi, lo, -1)])
    idx = [g.vertex_id(p) for p in pts]
    return idx + [idx[0]], pts + [pts[0]]


def test_empty_sigma_all_plus(holed):
    g = build_graph(holed)
    c = build_connection(g)
    assert np.all(c.edge_signs == 1)


def test_cut_flips_only_edges_right_of_puncture(holed):
    g = build_graph(holed)
    sigma = make_punctures(holed, [(7, 7)])
    c = build_connection(g, sigma)
    neg = [tuple(map(tuple, g.vertices[e])) for e, s in zip(g.edges, c.edge_signs) if s < 0]
    # the ray y = 3.5, x > 3.5 meets only the vertical edge (5,3)-(5,4)
    assert neg == [((5, 3), (5, 4))]


def test_puncture_validation(holed):
    with pytest.raises(GeometryError, match="integer coordinate"):
        make_punctures(holed, [(6, 7)])
    with pytest.raises(GeometryError, match="inside"):
        make_punctures(holed, [(1, 1)])


def test_unbounded_puncture_is_noop(holed, caplog):
    g = build_graph(holed.scaled(2))
    with caplog.at_level(logging.WARNING):
        sigma = make_punctures(holed.scaled(2), [(31, 31)])
    assert "no effect" in caplog.text
    c = build_connection(g, sigma)
    rng = np.random.default_rng(3)
    for _ in range(50):
        cyc = random_simple_cycle(g, rng)
        if cyc is not None:
            assert cycle_monodromy(c, cyc) == 1


def test_monodromy_examples(holed):
    g = build_graph(holed)
    one = build_connection(g, make_punctures(holed, [(7, 7)]))
    two = build_connection(g, make_punctures(holed, [(5, 5), (7, 7)]))
    cyc, pts = _ring(g, 1, 5)
    assert cycle_monodromy(one, cyc) == -1
    assert cycle_monodromy(one, cyc[::-1]) == -1
    assert cycle_monodromy(two, cyc) == 1
    assert winding_parity(one.sigma, pts) == -1
    assert winding_parity(two.sigma, pts) == 1
    g2 = build_graph(holed.scaled(2))
    c2 = build_connection(g2, scale_punctures(holed, [(7, 7)], 2))
    square = [(1, 1), (2, 1), (2, 2), (1, 2), (1, 1)]
    assert cycle_monodromy(c2, [g2.vertex_id(p) for p in square]) == 1
    assert winding_parity(c2.sigma, square) == 1


def test_cycle_errors(holed):
    g = build_graph(holed)
    c = build_connection(g)
    a, b = g.vertex_id((1, 1)), g.vertex_id((2, 1))
    with pytest.raises(ValueError, match="not closed"):
        cycle_monodromy(c, [a, b])
    far = g.vertex_id((5, 5))
    with pytest.raises(ValueError, match="non-adjacent"):
        cycle_monodromy(c, [a, far, a])


def test_winding_number_signs():
    loop = [(0, 0), (2, 0), (2, 2), (0, 2), (0, 0)]
    assert winding_number((1, 1), loop) == 1
    assert winding_number((1, 1), loop[::-1]) == -1
    assert winding_number((5, 1), loop) == 0
    with pytest.raises(ValueError):
        winding_number((0, 2), loop)


def test_monodromy_equals_winding_parity():
    for trial in monodromy_trials(cycles=200, seed=11):
        assert trial["agree"] == trial["cycles"] == 200


def test_contractible_cycles_trivial(holed):
    g = build_graph(holed.scaled(3))
    c = build_connection(g, scale_punctures(holed, [(7, 7)], 3))
    # every plaquette bounds a unit cell of the region
    verts = {tuple(v) for v in g.vertices}
    checked = 0
    for x, y in verts:
        corners = [(x, y), (x + 1, y), (x + 1, y + 1), (x, y + 1)]
        if all(p in verts for p in corners):
            ids = [g.vertex_id(p) for p in corners]
            if all((min(a, b), max(a, b)) in g.edge_index for a, b in zip(ids, ids[1:] + ids[:1])):
                assert cycle_monodromy(c, ids + ids[:1]) == 1
                checked += 1
    assert checked > 100
    # rings that stay left of the hole
    for lo, hi in ((1, 3), (1, 5), (2, 4)):
        cyc, _ = _ring(g, lo, hi)
        assert cycle_monodromy(c, cyc) == 1


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_gauge_transform_preserves_monodromy(seed):
    holed = make_region(HOLED)
    g = build_graph(holed.scaled(2))
    c = build_connection(g, scale_punctures(holed, [(7, 7)], 2))
    rng = np.random.default_rng(seed)
    gc = gauge_transform(c, rng.choice([-1, 1], size=g.n))
    cyc = random_simple_cycle(g, rng)
    if cyc is not None:
        assert cycle_monodromy(c, cyc) == cycle_monodromy(gc, cyc)


@pytest.mark.parametrize("cut", ["+x", "-x", "+y", "-y"])
def test_cut_directions_are_gauge_equivalent(holed, cut):
    g = build_graph(holed.scaled(2))
    sigma = scale_punctures(holed, [(7, 7)], 2)
    base = build_connection(g, sigma)
    other = build_connection(g, sigma, cut)
    rng = np.random.default_rng(5)
    for _ in range(40):
        cyc = random_simple_cycle(g, rng)
        if cyc is not None:
            assert cycle_monodromy(base, cyc) == cycle_monodromy(other, cyc)


def test_scale_punctures_nudges_even_coordinates(holed):
    s = scale_punctures(holed, [(7, 7)], 2)
    assert s.points == ((15, 15),)
    assert s.components == (1,)
    assert scale_punctures(holed, [(7, 7)], 3).points == ((21, 21),)
