"""Monte Carlo for continuous-time random walks with killing and winding weights.

A path of the rate-4 walk on Z^2 dies the first time it jumps along a bond that
is not an edge of the domain graph.  Surviving paths that return to their start
are weighted by the product of edge signs along the way, which equals
(-1)^(total winding around the punctures) for a closed walk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ive

from .connection import FlatConnection, build_connection
from .geometry import DomainGraph, LatticeRegion, _contains_doubled

# right, up, left, down
STEPS = np.array([[1, 0], [0, 1], [-1, 0], [0, -1]], dtype=np.int64)
BATCH = 8192


@dataclass(frozen=True)
class McEstimate:
    mean: float
    stderr: float
    samples: int
    seed: int


def scaled_i0(x: float) -> float:
    """e^{-x} I_0(x); Hankel asymptotic series above x = 1e6 (ive loses it near 1e12)."""
    if x < 1e6:
        return float(ive(0, x))
    r = 1.0 / (8.0 * x)
    return (1.0 + r * (1.0 + r * (4.5 + r * 37.5))) / math.sqrt(2.0 * math.pi * x)


def free_return_prob(t: float) -> float:
    """Return probability of the free rate-4 walk on Z^2: (e^{-2t} I_0(2t))^2."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    return scaled_i0(2.0 * t) ** 2


def _move_table(graph: DomainGraph, conn: FlatConnection) -> np.ndarray:
    """(nx, ny, 4) int8 table: sign of the bond in each direction, 0 if killed."""
    nx, ny = graph.grid.shape
    table = np.zeros((nx, ny, 4), dtype=np.int8)
    x0, y0 = graph.origin
    v = graph.vertices
    a = v[graph.edges[:, 0]] - (x0, y0)
    b = v[graph.edges[:, 1]] - (x0, y0)
    s = conn.edge_signs
    horiz = a[:, 1] == b[:, 1]
    # a precedes b row-major, so a->b is right (horizontal) or up (vertical)
    table[a[horiz, 0], a[horiz, 1], 0] = s[horiz]
    table[b[horiz, 0], b[horiz, 1], 2] = s[horiz]
    table[a[~horiz, 0], a[~horiz, 1], 1] = s[~horiz]
    table[b[~horiz, 0], b[~horiz, 1], 3] = s[~horiz]
    return table


def _batch_rng(seed: int, batch: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(batch,)))


def _simulate(tables, start, t, samples, seed):
    """Yield per-path (weights per table, returned flag) in deterministic batches."""
    done = 0
    batch = 0
    while done < samples:
        size = min(BATCH, samples - done)
        rng = _batch_rng(seed, batch)
        jumps = rng.poisson(4.0 * t, size=size)
        kmax = int(jumps.max()) if size else 0
        dirs = rng.integers(0, 4, size=(size, kmax)) if kmax else np.zeros((size, 0), np.int64)
        pos = np.tile(np.asarray(start, dtype=np.int64), (size, 1))
        weights = [np.ones(size, dtype=np.int8) for _ in tables]
        alive = np.ones(size, dtype=bool)
        for k in range(kmax):
            act = (k < jumps) & alive
            if not act.any():
                break
            d = dirs[act, k]
            p = pos[act]
            any_alive = np.zeros(act.sum(), dtype=bool)
            for w, tab in zip(weights, tables):
                sgn = tab[p[:, 0], p[:, 1], d]
                w[act] *= sgn
                any_alive |= w[act] != 0
            pos[act] = p + STEPS[d]
            # a path dead in every domain is frozen so it cannot leave the grid
            idx = np.flatnonzero(act)
            alive[idx[~any_alive]] = False
        returned = (pos == start).all(axis=1)
        yield weights, returned
        done += size
        batch += 1


def _start(graph: DomainGraph, x) -> tuple[int, int]:
    if graph.vertex_id(x) < 0:
        raise ValueError(f"{x!r} is not a vertex of the domain graph")
    return int(x[0]) - graph.origin[0], int(x[1]) - graph.origin[1]


def mc_dirichlet_kernel(graph: DomainGraph, conn: FlatConnection | None, x, t: float,
                        samples: int, seed: int = 0) -> McEstimate:
    """Estimate the diagonal twisted Dirichlet heat kernel at vertex ``x``."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    conn = conn or build_connection(graph)
    start = _start(graph, x)
    table = _move_table(graph, conn)
    s1 = s2 = 0.0
    for (w,), ret in _simulate([table], start, t, samples, seed):
        val = w.astype(np.float64) * ret
        s1 += val.sum()
        s2 += (val ** 2).sum()
    return _estimate(s1, s2, samples, seed)


def _estimate(s1, s2, samples, seed):
    mean = s1 / samples
    if samples > 1:
        var = max(s2 - samples * mean ** 2, 0.0) / (samples - 1)
        se = math.sqrt(var / samples)
    else:
        se = float("inf")
    return McEstimate(float(mean), float(se), int(samples), int(seed))


def mc_heat_trace(graph: DomainGraph, conn: FlatConnection | None, t: float,
                  samples: int, seed: int = 0) -> McEstimate:
    """Sum of per-vertex kernel estimates, ``samples`` paths per vertex."""
    if t == 0:
        return McEstimate(float(graph.n), 0.0, 0, seed)
    conn = conn or build_connection(graph)
    total, var = 0.0, 0.0
    for k, v in enumerate(graph.vertices):
        est = mc_dirichlet_kernel(graph, conn, v, t, samples, seed=seed * 1_000_003 + k)
        total += est.mean
        var += est.stderr ** 2
    return McEstimate(total, math.sqrt(var), samples * graph.n, seed)


def simulate_free_walk(t: float, samples: int, seed: int = 0):
    """Free walk from the origin: returns (final positions, x-jump counts, y-jump counts)."""
    finals, jx, jy = [], [], []
    done, batch = 0, 0
    while done < samples:
        size = min(BATCH, samples - done)
        rng = _batch_rng(seed, batch)
        jumps = rng.poisson(4.0 * t, size=size)
        kmax = int(jumps.max()) if size else 0
        dirs = rng.integers(0, 4, size=(size, kmax))
        mask = np.arange(kmax)[None, :] < jumps[:, None]
        dx = (STEPS[dirs, 0] * mask).sum(axis=1)
        dy = (STEPS[dirs, 1] * mask).sum(axis=1)
        horiz = ((dirs % 2 == 0) & mask).sum(axis=1)
        finals.append(np.stack([dx, dy], axis=1))
        jx.append(horiz)
        jy.append(jumps - horiz)
        done += size
        batch += 1
    return np.concatenate(finals), np.concatenate(jx), np.concatenate(jy)


def decay_envelope(R: float, t: float) -> float:
    """Piecewise envelope for domain-change differences of lattice kernels."""
    if t <= 1:
        return t * math.exp(-R)
    if t <= R / (4 * math.e ** 2):
        return math.exp(-R) / t
    return math.exp(-R * R / (8 * t)) / t


def change_distance(region_a: LatticeRegion, region_b: LatticeRegion, x,
                    sigma_a=(), sigma_b=()) -> float:
    """Distance from ``x`` to the symmetric difference of two regions and puncture sets.

    The regions are compared on the half-lattice covering both bounding boxes.
    """
    xa0, ya0, xa1, ya1 = region_a.bbox
    xb0, yb0, xb1, yb1 = region_b.bbox
    xs = np.arange(2 * min(xa0, xb0), 2 * max(xa1, xb1) + 1)
    ys = np.arange(2 * min(ya0, yb0), 2 * max(ya1, yb1) + 1)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    ia = _contains_doubled(region_a.doubled_segments, gx, gy)
    ib = _contains_doubled(region_b.doubled_segments, gx, gy)
    diff = ia != ib
    px, py = 2 * x[0], 2 * x[1]
    d2 = []
    if diff.any():
        d2.append(((gx[diff] - px) ** 2 + (gy[diff] - py) ** 2).min())
    for p in set(map(tuple, sigma_a)) ^ set(map(tuple, sigma_b)):
        d2.append((p[0] - px) ** 2 + (p[1] - py) ** 2)
    return math.sqrt(min(d2)) / 2 if d2 else math.inf


def domain_change_decay(graph_a: DomainGraph, graph_b: DomainGraph,
                        conn_a: FlatConnection | None, conn_b: FlatConnection | None,
                        x, t_grid, samples: int, seed: int = 0):
    """Coupled MC differences of diagonal kernels in two domains at ``x``.

    Both domains see the same sampled paths, so identical setups give exactly
    zero.  Returns (rows, c_hat) with rows of
    (t, diff, stderr, envelope, ratio) and c_hat the largest ratio.
    """
    conn_a = conn_a or build_connection(graph_a)
    conn_b = conn_b or build_connection(graph_b)
    # a shared origin so a single position array drives both tables
    ox = min(graph_a.origin[0], graph_b.origin[0])
    oy = min(graph_a.origin[1], graph_b.origin[1])
    shape = (max(graph_a.origin[0] + graph_a.grid.shape[0], graph_b.origin[0] + graph_b.grid.shape[0]) - ox,
             max(graph_a.origin[1] + graph_a.grid.shape[1], graph_b.origin[1] + graph_b.grid.shape[1]) - oy)
    tables = []
    for g, c in ((graph_a, conn_a), (graph_b, conn_b)):
        if g.vertex_id(x) < 0:
            raise ValueError(f"{x!r} is not a vertex of both domains")
        tab = np.zeros(shape + (4,), dtype=np.int8)
        sx, sy = g.origin[0] - ox, g.origin[1] - oy
        tab[sx:sx + g.grid.shape[0], sy:sy + g.grid.shape[1]] = _move_table(g, c)
        tables.append(tab)
    start = (int(x[0]) - ox, int(x[1]) - oy)
    R = change_distance(graph_a.region, graph_b.region, x,
                        conn_a.sigma.points, conn_b.sigma.points)
    rows = []
    for k, t in enumerate(t_grid):
        s1 = s2 = 0.0
        for (wa, wb), ret in _simulate(tables, start, t, samples, seed + k):
            val = (wa.astype(np.float64) - wb) * ret
            s1 += val.sum()
            s2 += (val ** 2).sum()
        est = _estimate(s1, s2, samples, seed + k)
        env = decay_envelope(R, t) if math.isfinite(R) else 0.0
        ratio = abs(est.mean) / env if env > 0 else 0.0
        rows.append((float(t), est.mean, est.stderr, env, ratio))
    c_hat = max((r[4] for r in rows), default=0.0)
    return rows, c_hat
