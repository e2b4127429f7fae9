"""Integer-vertex polygonal regions, their lattice graphs and geometric summaries.

All membership predicates work on *doubled* integer coordinates, so that lattice
points, edge midpoints and half-integer punctures are all represented exactly.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from pathlib import Path

import numpy as np


class GeometryError(ValueError):
    """Raised for invalid region descriptions."""


Vertex = tuple[int, int]


def _signed_area2(loop):
    """Twice the signed (shoelace) area of a loop of integer vertices."""
    s = 0
    n = len(loop)
    for i in range(n):
        x1, y1 = loop[i]
        x2, y2 = loop[(i + 1) % n]
        s += x1 * y2 - x2 * y1
    return s


def _orient(ax, ay, bx, by, cx, cy):
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def _on_segment(ax, ay, bx, by, px, py):
    return (_orient(ax, ay, bx, by, px, py) == 0
            and min(ax, bx) <= px <= max(ax, bx)
            and min(ay, by) <= py <= max(ay, by))


def _segments_intersect(p1, p2, q1, q2):
    """Closed-segment intersection test (touching counts)."""
    d1 = _orient(*q1, *q2, *p1)
    d2 = _orient(*q1, *q2, *p2)
    d3 = _orient(*p1, *p2, *q1)
    d4 = _orient(*p1, *p2, *q2)
    if ((d1 > 0 > d2) or (d1 < 0 < d2)) and ((d3 > 0 > d4) or (d3 < 0 < d4)):
        return True
    return (d1 == 0 and _on_segment(*q1, *q2, *p1)
            or d2 == 0 and _on_segment(*q1, *q2, *p2)
            or d3 == 0 and _on_segment(*p1, *p2, *q1)
            or d4 == 0 and _on_segment(*p1, *p2, *q2))


def _point_in_loop(loop, px, py):
    """Strict even-odd test of (px, py) against a single loop; boundary -> False."""
    inside = False
    n = len(loop)
    for i in range(n):
        x1, y1 = loop[i]
        x2, y2 = loop[(i + 1) % n]
        if _on_segment(x1, y1, x2, y2, px, py):
            return False
        if (y1 > py) != (y2 > py):
            # crossing x compared exactly: px < x1 + (py - y1)(x2 - x1)/(y2 - y1)
            lhs = (px - x1) * (y2 - y1)
            rhs = (py - y1) * (x2 - x1)
            if (lhs < rhs) if y2 > y1 else (lhs > rhs):
                inside = not inside
    return inside


def _validate_loop(loop):
    if len(loop) < 3:
        raise GeometryError("loop needs at least 3 vertices")
    if len(set(loop)) != len(loop):
        raise GeometryError("non-simple loop: repeated vertex")
    if _signed_area2(loop) == 0:
        raise GeometryError("non-simple loop: zero area")
    n = len(loop)
    segs = [(loop[i], loop[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            a, b = segs[i]
            c, d = segs[j]
            if j == i + 1 or (i == 0 and j == n - 1):
                # adjacent segments share exactly one vertex; reject back-tracking overlap
                shared = b if j == i + 1 else a
                other_i = a if j == i + 1 else b
                other_j = d if j == i + 1 else c
                if (_orient(*other_i, *shared, *other_j) == 0
                        and (_on_segment(*shared, *other_j, *other_i)
                             or _on_segment(*shared, *other_i, *other_j))):
                    raise GeometryError("non-simple loop: overlapping edges")
                continue
            if _segments_intersect(a, b, c, d):
                raise GeometryError("non-simple loop: self-intersection")


@dataclass(frozen=True)
class LatticeRegion:
    """Open region bounded by integer-vertex loops (first outer, rest holes), scaled by L.

    ``loops`` are stored at base scale; every geometric query uses ``scale``.
    """

    loops: tuple[tuple[Vertex, ...], ...]
    scale: int = 1

    def scaled(self, L: int) -> "LatticeRegion":
        if L < 1:
            raise GeometryError("scale must be a positive integer")
        return LatticeRegion(self.loops, self.scale * int(L))

    @property
    def scaled_loops(self):
        s = self.scale
        return [[(s * x, s * y) for x, y in loop] for loop in self.loops]

    @cached_property
    def doubled_segments(self) -> np.ndarray:
        """(m, 4) int64 array of boundary segments in doubled coordinates."""
        rows = []
        for loop in self.scaled_loops:
            n = len(loop)
            for i in range(n):
                x1, y1 = loop[i]
                x2, y2 = loop[(i + 1) % n]
                rows.append((2 * x1, 2 * y1, 2 * x2, 2 * y2))
        return np.array(rows, dtype=np.int64)

    @property
    def bbox(self):
        pts = [v for loop in self.scaled_loops for v in loop]
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        return min(xs), min(ys), max(xs), max(ys)

    def to_document(self) -> dict:
        return {"format": 1, "loops": [[list(v) for v in loop] for loop in self.loops],
                "scale": self.scale}

    @property
    def digest(self) -> str:
        """Canonical digest of the base-scale geometry (scale excluded)."""
        canon = json.dumps([[list(v) for v in _canonical_loop(loop)] for loop in self.loops],
                           separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _canonical_loop(loop):
    k = min(range(len(loop)), key=lambda i: loop[i])
    return loop[k:] + loop[:k]


def _as_int(v):
    if isinstance(v, bool) or not isinstance(v, int):
        raise GeometryError(f"non-integer vertex coordinate: {v!r}")
    return v


def make_region(loops, scale: int = 1) -> LatticeRegion:
    """Validate loops and normalize orientation (outer CCW, holes CW)."""
    if not loops:
        raise GeometryError("region needs at least one loop")
    if isinstance(scale, bool) or not isinstance(scale, int) or scale < 1:
        raise GeometryError("scale must be a positive integer")
    clean = []
    for loop in loops:
        pts = []
        for v in loop:
            if len(v) != 2:
                raise GeometryError(f"vertex must be a pair: {v!r}")
            pts.append((_as_int(v[0]), _as_int(v[1])))
        _validate_loop(pts)
        clean.append(pts)

    for i in range(len(clean)):
        for j in range(i + 1, len(clean)):
            a, b = clean[i], clean[j]
            for k in range(len(a)):
                for m in range(len(b)):
                    if _segments_intersect(a[k], a[(k + 1) % len(a)], b[m], b[(m + 1) % len(b)]):
                        raise GeometryError("intersecting loops")

    outer = clean[0]
    for hole in clean[1:]:
        if not _point_in_loop(outer, *hole[0]):
            raise GeometryError("hole outside outer loop")
    for i, hole in enumerate(clean[1:]):
        for j, other in enumerate(clean[1:]):
            if i != j and _point_in_loop(other, *hole[0]):
                raise GeometryError("nested hole")

    out = []
    for i, loop in enumerate(clean):
        ccw = _signed_area2(loop) > 0
        if (i == 0) != ccw:
            loop = loop[::-1]
        out.append(tuple(loop))
    return LatticeRegion(tuple(out), scale)


def parse_region(spec) -> LatticeRegion:
    """Build a region from a JSON document (dict, JSON text, or path)."""
    if isinstance(spec, (str, Path)) and not str(spec).lstrip().startswith("{"):
        spec = Path(spec).read_text()
    if isinstance(spec, str):
        try:
            spec = json.loads(spec)
        except json.JSONDecodeError as exc:
            raise GeometryError(f"malformed domain document: {exc}") from None
    if not isinstance(spec, dict) or "loops" not in spec:
        raise GeometryError("domain document must be an object with 'loops'")
    return make_region(spec["loops"], spec.get("scale", 1))


# ---------------------------------------------------------------------------
# exact vectorized predicates (doubled coordinates)

def _contains_doubled(segs: np.ndarray, px: np.ndarray, py: np.ndarray) -> np.ndarray:
    """Even-odd membership in the open region for arrays of doubled points."""
    px = np.asarray(px, dtype=np.int64)
    py = np.asarray(py, dtype=np.int64)
    inside = np.zeros(px.shape, dtype=bool)
    on_bd = np.zeros(px.shape, dtype=bool)
    for x1, y1, x2, y2 in segs:
        cr = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)
        on_bd |= ((cr == 0) & (px >= min(x1, x2)) & (px <= max(x1, x2))
                  & (py >= min(y1, y2)) & (py <= max(y1, y2)))
        if y1 == y2:
            continue
        straddle = (y1 > py) != (y2 > py)
        lhs = (px - x1) * (y2 - y1)
        rhs = (py - y1) * (x2 - x1)
        left = lhs < rhs if y2 > y1 else lhs > rhs
        inside ^= straddle & left
    return inside & ~on_bd


def _crosses_boundary(segs: np.ndarray, ax, ay, bx, by) -> np.ndarray:
    """Closed-segment intersection of each (a, b) with any boundary segment."""
    hit = np.zeros(np.shape(ax), dtype=bool)
    for x1, y1, x2, y2 in segs:
        d1 = (x2 - x1) * (ay - y1) - (y2 - y1) * (ax - x1)
        d2 = (x2 - x1) * (by - y1) - (y2 - y1) * (bx - x1)
        d3 = (bx - ax) * (y1 - ay) - (by - ay) * (x1 - ax)
        d4 = (bx - ax) * (y2 - ay) - (by - ay) * (x2 - ax)
        proper = (((d1 > 0) & (d2 < 0)) | ((d1 < 0) & (d2 > 0))) & \
                 (((d3 > 0) & (d4 < 0)) | ((d3 < 0) & (d4 > 0)))

        def within(px, py, qx1, qy1, qx2, qy2):
            return ((px >= np.minimum(qx1, qx2)) & (px <= np.maximum(qx1, qx2))
                    & (py >= np.minimum(qy1, qy2)) & (py <= np.maximum(qy1, qy2)))

        touch = ((d1 == 0) & within(ax, ay, x1, y1, x2, y2)) \
            | ((d2 == 0) & within(bx, by, x1, y1, x2, y2)) \
            | ((d3 == 0) & within(x1, y1, ax, ay, bx, by)) \
            | ((d4 == 0) & within(x2, y2, ax, ay, bx, by))
        hit |= proper | touch
    return hit


def contains_point(region: LatticeRegion, p, doubled: bool = False) -> bool:
    """True iff ``p`` lies in the open region.

    ``p`` is a lattice or half-lattice point; pass ``doubled=True`` when its
    coordinates are already doubled integers.  Non-doubled input may use
    ``Fraction`` or floats that are exact multiples of 1/2.
    """
    if doubled:
        dx, dy = int(p[0]), int(p[1])
    else:
        fx, fy = Fraction(p[0]) * 2, Fraction(p[1]) * 2
        if fx.denominator != 1 or fy.denominator != 1:
            raise GeometryError("point must have coordinates in (1/2)Z")
        dx, dy = int(fx), int(fy)
    return bool(_contains_doubled(region.doubled_segments, np.array([dx]), np.array([dy]))[0])


def unit_segment_in_region(region: LatticeRegion, p, q) -> bool:
    """True iff the closed unit segment pq lies in the open region."""
    (px, py), (qx, qy) = p, q
    if abs(px - qx) + abs(py - qy) != 1:
        raise GeometryError("points are not unit-separated")
    segs = region.doubled_segments
    ax, ay, bx, by = 2 * px, 2 * py, 2 * qx, 2 * qy
    pts_x = np.array([ax, bx, (ax + bx) // 2])
    pts_y = np.array([ay, by, (ay + by) // 2])
    if not _contains_doubled(segs, pts_x, pts_y).all():
        return False
    return not bool(_crosses_boundary(segs, np.array([ax]), np.array([ay]),
                                      np.array([bx]), np.array([by]))[0])


# ---------------------------------------------------------------------------
# lattice graph

@dataclass
class DomainGraph:
    """Lattice graph of a scaled region.

    Vertices are ordered row-major (by y, then x).  ``edges`` holds index
    pairs (i < j); ``ext_boundary`` the lattice points outside the region
    with a lattice neighbour inside it.
    """

    region: LatticeRegion
    vertices: np.ndarray
    edges: np.ndarray
    ext_boundary: np.ndarray
    origin: tuple[int, int] = field(repr=False)
    grid: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return len(self.vertices)

    @cached_property
    def index(self) -> dict[Vertex, int]:
        return {(int(x), int(y)): i for i, (x, y) in enumerate(self.vertices)}

    @cached_property
    def edge_index(self) -> dict[tuple[int, int], int]:
        return {(int(i), int(j)): k for k, (i, j) in enumerate(self.edges)}

    def vertex_id(self, p) -> int:
        """Index of lattice point ``p`` or -1 when absent (grid lookup)."""
        x0, y0 = self.origin
        i, j = int(p[0]) - x0, int(p[1]) - y0
        if 0 <= i < self.grid.shape[0] and 0 <= j < self.grid.shape[1]:
            return int(self.grid[i, j])
        return -1

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.n) if len(self.edges) else \
            np.zeros(self.n, dtype=np.int64)


def build_graph(region: LatticeRegion) -> DomainGraph:
    """Vertices, edges and exterior boundary of ``region`` (at its own scale)."""
    segs = region.doubled_segments
    xmin, ymin, xmax, ymax = region.bbox
    # one-site margin so the exterior boundary fits in the grid
    xs = np.arange(xmin - 1, xmax + 2, dtype=np.int64)
    ys = np.arange(ymin - 1, ymax + 2, dtype=np.int64)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    inside = _contains_doubled(segs, 2 * gx, 2 * gy)
    if not inside.any():
        raise GeometryError("region contains no lattice points")

    grid = np.full(inside.shape, -1, dtype=np.int64)
    # row-major in (y, x): order by y first
    order_y, order_x = np.nonzero(inside.T)
    grid[order_x, order_y] = np.arange(len(order_x))
    vertices = np.stack([xs[order_x], ys[order_y]], axis=1)

    edges = []
    for dx, dy in ((1, 0), (0, 1)):
        a = inside[: inside.shape[0] - dx, : inside.shape[1] - dy]
        b = inside[dx:, dy:]
        cand = a & b
        ix, iy = np.nonzero(cand)
        if len(ix) == 0:
            continue
        ax, ay = 2 * xs[ix], 2 * ys[iy]
        bx, by = ax + 2 * dx, ay + 2 * dy
        ok = _contains_doubled(segs, ax + dx, ay + dy)
        ok &= ~_crosses_boundary(segs, ax, ay, bx, by)
        ia = grid[ix[ok], iy[ok]]
        ib = grid[ix[ok] + dx, iy[ok] + dy]
        edges.append(np.stack([np.minimum(ia, ib), np.maximum(ia, ib)], axis=1))
    edges = np.concatenate(edges) if edges else np.zeros((0, 2), dtype=np.int64)
    edges = edges[np.lexsort((edges[:, 1], edges[:, 0]))]

    nb = np.zeros_like(inside)
    nb[1:, :] |= inside[:-1, :]
    nb[:-1, :] |= inside[1:, :]
    nb[:, 1:] |= inside[:, :-1]
    nb[:, :-1] |= inside[:, 1:]
    ext = nb & ~inside
    ey, ex = np.nonzero(ext.T)
    ext_boundary = np.stack([xs[ex], ys[ey]], axis=1)

    return DomainGraph(region=region, vertices=vertices, edges=edges,
                       ext_boundary=ext_boundary, origin=(int(xs[0]), int(ys[0])), grid=grid)


# ---------------------------------------------------------------------------
# geometric summary

@dataclass(frozen=True)
class GeometrySummary:
    area: Fraction
    perimeter: float
    corners: tuple[tuple[Vertex, float], ...]


def _merged_loop(loop):
    """Drop vertices where the boundary continues straight on."""
    pts = list(loop)
    changed = True
    while changed and len(pts) > 3:
        changed = False
        for i in range(len(pts)):
            a, b, c = pts[i - 1], pts[i], pts[(i + 1) % len(pts)]
            if _orient(*a, *b, *c) == 0:
                del pts[i]
                changed = True
                break
    return pts


def summarize_geometry(region: LatticeRegion) -> GeometrySummary:
    """Exact area, perimeter and interior corner angles (measured inside the region)."""
    loops = region.scaled_loops
    area = Fraction(sum(_signed_area2(loop) for loop in loops), 2)
    perimeter = 0.0
    corners = []
    for loop in loops:
        n = len(loop)
        perimeter += sum(math.hypot(loop[(i + 1) % n][0] - loop[i][0],
                                    loop[(i + 1) % n][1] - loop[i][1]) for i in range(n))
        # orientation is normalized so the region is always on the left
        pts = _merged_loop(loop)
        m = len(pts)
        for i in range(m):
            a, b, c = pts[i - 1], pts[i], pts[(i + 1) % m]
            ux, uy = b[0] - a[0], b[1] - a[1]
            vx, vy = c[0] - b[0], c[1] - b[1]
            turn = math.atan2(ux * vy - uy * vx, ux * vx + uy * vy)
            corners.append((b, math.pi - turn))
    return GeometrySummary(area=area, perimeter=perimeter, corners=tuple(corners))


def boundary_lattice_count(region: LatticeRegion) -> int:
    """Number of lattice points on the boundary (sum of gcds)."""
    total = 0
    for loop in region.scaled_loops:
        n = len(loop)
        for i in range(n):
            total += math.gcd(abs(loop[(i + 1) % n][0] - loop[i][0]),
                              abs(loop[(i + 1) % n][1] - loop[i][1]))
    return total


# ---------------------------------------------------------------------------
# complement components

def complement_component(region: LatticeRegion, doubled_point) -> int:
    """Index of the complement component holding a point outside the open region.

    Returns the hole loop index (1, 2, ...) or 0 for the unbounded component.
    """
    px, py = doubled_point
    loops = [[(2 * x, 2 * y) for x, y in loop] for loop in region.scaled_loops]
    if _contains_doubled(region.doubled_segments, np.array([px]), np.array([py]))[0]:
        raise GeometryError("point lies inside the region")
    for k, loop in enumerate(loops):
        n = len(loop)
        if any(_on_segment(*loop[i], *loop[(i + 1) % n], px, py) for i in range(n)):
            return k
    for k, loop in enumerate(loops[1:], start=1):
        if _point_in_loop(loop, px, py):
            return k
    return 0
