"""Flat +/-1 connections built from branch cuts, and monodromy of lattice cycles."""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass

import numpy as np

from .geometry import DomainGraph, GeometryError, LatticeRegion, complement_component

log = logging.getLogger(__name__)

CUT_DIRECTIONS = ("+x", "-x", "+y", "-y")


@dataclass(frozen=True)
class PunctureSet:
    """Punctures in doubled coordinates (both odd), tagged by complement component.

    ``components[k]`` is 0 for the unbounded component, otherwise the hole index.
    """

    points: tuple[tuple[int, int], ...] = ()
    components: tuple[int, ...] = ()

    def __len__(self):
        return len(self.points)

    @property
    def digest(self) -> str:
        canon = json.dumps(sorted([list(p) for p in self.points]), separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]


def make_punctures(region: LatticeRegion, doubled_points) -> PunctureSet:
    """Validate punctures against ``region`` (at its current scale)."""
    pts, comps = [], []
    for p in doubled_points or ():
        x, y = int(p[0]), int(p[1])
        if x % 2 == 0 or y % 2 == 0:
            raise GeometryError(f"puncture {p!r} has an integer coordinate")
        try:
            comp = complement_component(region, (x, y))
        except GeometryError:
            raise GeometryError(f"puncture {p!r} lies inside the region") from None
        if comp == 0:
            log.warning("puncture %r is in the unbounded component; it has no effect", p)
        pts.append((x, y))
        comps.append(comp)
    return PunctureSet(tuple(pts), tuple(comps))


def scale_punctures(base_region: LatticeRegion, sigma_doubled, L: int) -> PunctureSet:
    """Punctures for the region scaled by ``L``.

    L times a half-integer point can land on the lattice; it is then nudged by
    +1/2 in each even coordinate.  Only the complement component matters for the
    monodromy class, so the nudge is checked to stay in the same component.
    """
    base = make_punctures(base_region, sigma_doubled)
    region = base_region.scaled(L)
    pts = []
    for (x, y), comp in zip(base.points, base.components):
        sx, sy = L * x, L * y
        sx += 1 if sx % 2 == 0 else 0
        sy += 1 if sy % 2 == 0 else 0
        if complement_component(region, (sx, sy)) != comp:
            raise GeometryError(f"puncture {(x, y)!r} cannot be placed at scale {L}")
        pts.append((sx, sy))
    return make_punctures(region, pts)


@dataclass(frozen=True)
class FlatConnection:
    """Edge signs aligned with ``graph.edges``."""

    graph: DomainGraph
    sigma: PunctureSet
    edge_signs: np.ndarray
    cut_dir: str = "+x"


def _crossing_parity(graph: DomainGraph, sigma: PunctureSet, cut_dir: str) -> np.ndarray:
    v = graph.vertices
    a = v[graph.edges[:, 0]]
    b = v[graph.edges[:, 1]]
    # edges are stored with a < b in row-major order, so b is above or to the right of a
    vertical = a[:, 0] == b[:, 0]
    flips = np.zeros(len(graph.edges), dtype=np.int64)
    for sx, sy in sigma.points:
        if cut_dir in ("+x", "-x"):
            across = vertical & (2 * a[:, 1] < sy) & (2 * b[:, 1] > sy)
            side = (2 * a[:, 0] > sx) if cut_dir == "+x" else (2 * a[:, 0] < sx)
        else:
            across = ~vertical & (2 * a[:, 0] < sx) & (2 * b[:, 0] > sx)
            side = (2 * a[:, 1] > sy) if cut_dir == "+y" else (2 * a[:, 1] < sy)
        flips += across & side
    return flips % 2


def build_connection(graph: DomainGraph, sigma: PunctureSet | None = None,
                     cut_dir: str = "+x") -> FlatConnection:
    """Sign -1 on every edge crossing an odd number of branch-cut rays."""
    sigma = sigma or PunctureSet()
    if cut_dir not in CUT_DIRECTIONS:
        raise ValueError(f"cut_dir must be one of {CUT_DIRECTIONS}")
    for p in sigma.points:
        if p[0] % 2 == 0 or p[1] % 2 == 0:
            raise GeometryError(f"puncture {p!r} has an integer coordinate")
    if sigma.points:
        # re-validate against this graph's region (catches scale mix-ups)
        make_punctures(graph.region, sigma.points)
    signs = 1 - 2 * _crossing_parity(graph, sigma, cut_dir)
    return FlatConnection(graph, sigma, signs.astype(np.int8), cut_dir)


def gauge_transform(conn: FlatConnection, vertex_signs) -> FlatConnection:
    """Conjugate by a diagonal +/-1 gauge: rho_xy -> g_x rho_xy g_y."""
    g = np.asarray(vertex_signs, dtype=np.int8)
    e = conn.graph.edges
    signs = (conn.edge_signs * g[e[:, 0]] * g[e[:, 1]]).astype(np.int8)
    return FlatConnection(conn.graph, conn.sigma, signs, conn.cut_dir)


def _check_cycle(cycle):
    cycle = [int(c) for c in cycle]
    if len(cycle) < 2 or cycle[0] != cycle[-1]:
        raise ValueError("cycle is not closed")
    body = cycle[:-1]
    if len(set(body)) != len(body):
        raise ValueError("cycle repeats a vertex")
    return cycle


def cycle_monodromy(conn: FlatConnection, cycle) -> int:
    """Product of edge signs along a closed vertex-index cycle (first == last)."""
    cycle = _check_cycle(cycle)
    eidx = conn.graph.edge_index
    prod = 1
    for u, v in zip(cycle[:-1], cycle[1:]):
        k = eidx.get((min(u, v), max(u, v)))
        if k is None:
            raise ValueError(f"non-adjacent step {u} -> {v}")
        prod *= int(conn.edge_signs[k])
    return prod


def winding_number(doubled_point, loop) -> int:
    """Exact winding number of a closed lattice polyline around a doubled point.

    Counts signed crossings of the upward vertical ray from the point.
    """
    px, py = doubled_point
    pts = [(2 * int(x), 2 * int(y)) for x, y in loop]
    if pts[0] != pts[-1]:
        pts.append(pts[0])
    w = 0
    for (x1, y1), (x2, y2) in zip(pts[:-1], pts[1:]):
        cr = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)
        if cr == 0 and min(x1, x2) <= px <= max(x1, x2) and min(y1, y2) <= py <= max(y1, y2):
            raise ValueError("puncture lies on the cycle path")
        if (x1 <= px) != (x2 <= px):
            # crossing y at px compared with py; cr > 0 means point left of a->b
            if x2 > x1 and cr < 0:
                w -= 1
            elif x2 < x1 and cr > 0:
                w += 1
    return w


def winding_parity(sigma: PunctureSet, cycle_points) -> int:
    """(-1) to the total winding number of a closed lattice path around the punctures."""
    total = sum(winding_number(p, cycle_points) for p in sigma.points)
    return -1 if total % 2 else 1


def random_simple_cycle(graph: DomainGraph, rng: np.random.Generator, start: int | None = None,
                        max_steps: int = 20000):
    """Random simple cycle via loop-erased random walk closed back to the start.

    Returns a vertex-index list with first == last, or None if no cycle was found.
    """
    nbrs = _neighbours(graph)
    if start is None:
        start = int(rng.integers(graph.n))
    if len(nbrs[start]) < 2:
        return None
    path = [start]
    pos = {start: 0}
    for _ in range(max_steps):
        cur = path[-1]
        nxt = nbrs[cur][rng.integers(len(nbrs[cur]))]
        if nxt == start and len(path) >= 4:
            return path + [start]
        if nxt in pos:
            k = pos[nxt]
            for v in path[k + 1:]:
                del pos[v]
            del path[k + 1:]
        else:
            pos[nxt] = len(path)
            path.append(nxt)
    return None


def _neighbours(graph: DomainGraph):
    nbrs = [[] for _ in range(graph.n)]
    for i, j in graph.edges:
        nbrs[int(i)].append(int(j))
        nbrs[int(j)].append(int(i))
    return nbrs
