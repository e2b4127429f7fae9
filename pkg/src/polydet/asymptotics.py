"""L-sweeps of log-determinants and regression on the large-L expansion.

The expansion fitted is

    logdet(L) ~ n_sites * alpha0 + sum_classes count_c * beta_c + alpha2 * log L + alpha3

where the boundary sum runs over exterior-boundary sites grouped either by the
local shape of the region in a radius-2 disk ("shape") or by the lattice-symmetry
class of the nearest boundary edge ("edge").
"""

from __future__ import annotations

import hashlib
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.integrate import quad

from .connection import build_connection, scale_punctures
from .continuum import EULER_GAMMA, T_SPLIT, continuum_zeta_prime_zero, corner_term
from .geometry import (LatticeRegion, _contains_doubled, build_graph, summarize_geometry)
from .spectral import assemble, logdet
from .walker import free_return_prob, scaled_i0

log = logging.getLogger(__name__)

# alpha0 = 4G/pi, G Catalan's constant; used only as a printed cross-reference
CATALAN = 0.91596559417721901505


class RankDeficientDesign(ValueError):
    pass


# ---------------------------------------------------------------------------
# alpha0

def alpha0_quadrature() -> float:
    """Integral of (1[t < e^{-gamma}] - P0(t)) dt/t over (0, inf), in u = log t."""
    split = -EULER_GAMMA

    def lower(u):
        t = math.exp(u)
        return 1.0 - free_return_prob(t)

    def upper(u):
        return -free_return_prob(math.exp(u))

    total = 0.0
    # 1 - P0(t) <= 4t: the lower tail below u=-40 is below 1e-17
    for lo, hi, g in ((-40.0, split, lower), (split, 30.0, upper)):
        knots = np.linspace(lo, hi, 15)
        for a, b in zip(knots[:-1], knots[1:]):
            total += quad(g, a, b, epsabs=1e-14, epsrel=1e-13, limit=200)[0]
    # P0(t) ~ 1/(4 pi t) (1 + 1/(8t) + ...) beyond t = e^30
    T = math.exp(30.0)
    total -= 1.0 / (4 * math.pi * T)
    return total


def alpha0_lattice_integral() -> float:
    """(1/4pi^2) double integral of log(4 - 2cos a - 2cos b) over the torus.

    The inner integral is done in closed form: (1/2pi) int log(c - 2 cos a) da
    = arccosh(c/2) for c >= 2.
    """
    val, _ = quad(lambda b: math.acosh((4.0 - 2.0 * math.cos(b)) / 2.0), 0.0, math.pi,
                  epsabs=1e-14, epsrel=1e-13, limit=200)
    return val / math.pi


def alpha0_reference(tol: float = 1e-8) -> float:
    q = alpha0_quadrature()
    lat = alpha0_lattice_integral()
    if abs(q - lat) > tol:
        raise ArithmeticError(f"alpha0 oracles disagree: {q!r} vs {lat!r}")
    return q


# ---------------------------------------------------------------------------
# corner reference constants (axis-aligned right angles, via reflection)

def _half_line_excess(t):
    """sum_{i>=1} e^{-2t} I_{2i}(2t): even-site mass of the 1D walk beyond the origin."""
    return 0.5 * (0.5 * (1.0 + math.exp(-4.0 * t)) - scaled_i0(2.0 * t))


def right_angle_corner_constant() -> float:
    """Constant contributed by one convex, axis-aligned right-angle corner.

    Using reflection, the quarter-plane kernel minus free and half-plane parts
    sums to s(t)^2 with s the half-line excess above; the constant is
    -int (s^2 - 1[t >= e^{-gamma}] / 16) dt/t.  It is the constant left over
    when every exterior-boundary site carries the straight-edge coefficient.
    """
    def g(u):
        t = math.exp(u)
        return _half_line_excess(t) ** 2 - (1.0 / 16 if t >= T_SPLIT else 0.0)

    total = 0.0
    split = -EULER_GAMMA
    for lo, hi in ((-40.0, split), (split, 40.0)):
        knots = np.linspace(lo, hi, 17)
        for a, b in zip(knots[:-1], knots[1:]):
            total += quad(g, a, b, epsabs=1e-14, epsrel=1e-13, limit=200)[0]
    # s(t) = 1/4 - 1/(2 sqrt(4 pi t)) + ...; tail of s^2 - 1/16 ~ -1/(8 sqrt(pi t))
    T = math.exp(40.0)
    total += -1.0 / (4 * math.sqrt(math.pi * T))
    return -total


# ---------------------------------------------------------------------------
# boundary classification

_DISK = [(dx, dy) for dx in range(-4, 5) for dy in range(-4, 5) if dx * dx + dy * dy <= 16]


def _canonical_direction(dx, dy):
    g = math.gcd(abs(dx), abs(dy))
    a, b = abs(dx) // g, abs(dy) // g
    return (max(a, b), min(a, b))


def classify_boundary(region: LatticeRegion, ext_boundary: np.ndarray):
    """Shape class and edge group for each exterior-boundary site.

    The shape key encodes which half-lattice points of the closed radius-2 disk
    around the site lie in the region.  The edge group is the lattice-symmetry
    class of the direction of the nearest boundary segment.
    """
    segs = region.doubled_segments
    pts = 2 * ext_boundary
    off = np.array(_DISK, dtype=np.int64)
    qx = pts[:, 0:1] + off[None, :, 0]
    qy = pts[:, 1:2] + off[None, :, 1]
    inside = _contains_doubled(segs, qx, qy)
    shapes = [hashlib.sha1(np.packbits(row).tobytes()).hexdigest()[:10] for row in inside]

    # nearest segment by exact squared distance (rational, compared via floats of
    # small integers; ties resolved by the smaller canonical direction)
    groups = []
    dirs = [_canonical_direction(x2 - x1, y2 - y1) for x1, y1, x2, y2 in segs]
    P = pts.astype(np.float64)
    d2 = np.empty((len(pts), len(segs)))
    for k, (x1, y1, x2, y2) in enumerate(segs):
        vx, vy = x2 - x1, y2 - y1
        L2 = vx * vx + vy * vy
        s = np.clip(((P[:, 0] - x1) * vx + (P[:, 1] - y1) * vy) / L2, 0.0, 1.0)
        d2[:, k] = (P[:, 0] - x1 - s * vx) ** 2 + (P[:, 1] - y1 - s * vy) ** 2
    for row in d2:
        best = row.min()
        cands = sorted(dirs[k] for k in np.flatnonzero(row <= best + 1e-9))
        groups.append("g%d_%d" % cands[0])
    return shapes, groups


# ---------------------------------------------------------------------------
# sweep

@dataclass
class SweepRecord:
    L: int
    n_sites: int
    n_edges: int
    logdet: float
    sigma: tuple = ()
    class_counts: dict = field(default_factory=dict)
    group_counts: dict = field(default_factory=dict)
    runtime_ms: float = 0.0

    @property
    def ext_count(self) -> int:
        return sum(self.group_counts.values())


def sweep_one(region: LatticeRegion, sigma_doubled, L: int, cut_dir: str = "+x") -> SweepRecord:
    t0 = time.perf_counter()
    scaled = region.scaled(L)
    graph = build_graph(scaled)
    sigma = scale_punctures(region, sigma_doubled, L)
    conn = build_connection(graph, sigma, cut_dir)
    try:
        ld = logdet(assemble(graph, conn))
    except ArithmeticError as exc:
        raise ArithmeticError(f"factorization failed at L={L}: {exc}") from exc
    shapes, groups = classify_boundary(scaled, graph.ext_boundary)
    cc, gc = {}, {}
    for s in shapes:
        cc[s] = cc.get(s, 0) + 1
    for g in groups:
        gc[g] = gc.get(g, 0) + 1
    return SweepRecord(L=L, n_sites=graph.n, n_edges=len(graph.edges), logdet=ld,
                       sigma=tuple(tuple(p) for p in sigma_doubled or ()),
                       class_counts=dict(sorted(cc.items())), group_counts=dict(sorted(gc.items())),
                       runtime_ms=1000 * (time.perf_counter() - t0))


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("POLYDET_THREADS", "1")))
    except ValueError:
        return 1


def sweep(region: LatticeRegion, sigma_doubled, Ls, workers: int | None = None,
          cut_dir: str = "+x") -> list[SweepRecord]:
    """log-determinants and boundary classes for each L (parallel over L)."""
    Ls = sorted(set(int(L) for L in Ls))
    workers = workers or worker_count()
    if workers > 1 and len(Ls) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(Ls))) as ex:
            futs = [ex.submit(sweep_one, region, sigma_doubled, L, cut_dir) for L in Ls]
            return [f.result() for f in futs]
    return [sweep_one(region, sigma_doubled, L, cut_dir) for L in Ls]


def geometric_grid(lo: int, hi: int, ratio: float = math.sqrt(2)) -> list[int]:
    out = []
    k = 0
    while True:
        L = int(round(lo * ratio ** k))
        if L > hi:
            break
        if not out or L != out[-1]:
            out.append(L)
        k += 1
    if out[-1] != hi:
        out.append(hi)
    return out


def parse_L_spec(spec: str) -> list[int]:
    """'8:256:geom', '8:64:lin:8', or '8,16,32'."""
    if ":" in spec:
        parts = spec.split(":")
        lo, hi = int(parts[0]), int(parts[1])
        kind = parts[2] if len(parts) > 2 else "geom"
        if lo < 1 or hi < lo:
            raise ValueError(f"bad L range {spec!r}")
        if kind == "geom":
            return geometric_grid(lo, hi)
        if kind == "lin":
            step = int(parts[3]) if len(parts) > 3 else 1
            return list(range(lo, hi + 1, step))
        raise ValueError(f"unknown L grid kind {kind!r}")
    Ls = sorted({int(x) for x in spec.split(",") if x.strip()})
    if not Ls or Ls[0] < 1:
        raise ValueError(f"bad L list {spec!r}")
    return Ls


# ---------------------------------------------------------------------------
# fit

@dataclass
class FitReport:
    alpha0: float
    alpha0_pinned: bool
    boundary: dict
    alpha2: float
    alpha3: float
    intercept: float
    folded: dict
    residuals: dict
    residual_rms: float
    residual_max: float
    condition: float
    boundary_model: str
    alpha2_corner_sum: float | None = None
    alpha2_minus_two_a2: float | None = None
    alpha2_verdict: str | None = None
    corner_constant: float | None = None
    alpha3_reference: float | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["format"] = 1
        d["residuals"] = {str(k): v for k, v in self.residuals.items()}
        return d


def _design_columns(records, model):
    key = "group_counts" if model == "edge" else "class_counts"
    names = sorted({c for r in records for c in getattr(r, key)})
    M = np.array([[getattr(r, key).get(c, 0) for c in names] for r in records], dtype=np.float64)
    return names, M


def _reduce_boundary(names, M):
    """Fold constant columns into the intercept and merge identical columns."""
    folded = {}
    cols, labels = [], []
    for k, name in enumerate(names):
        col = M[:, k]
        if np.all(col == col[0]):
            folded[name] = float(col[0])
            continue
        for j, c in enumerate(cols):
            if np.array_equal(c, col):
                labels[j] = labels[j] + "+" + name
                cols[j] = c
                break
        else:
            cols.append(col.copy())
            labels.append(name)
    return labels, (np.stack(cols, axis=1) if cols else np.zeros((M.shape[0], 0))), folded


def fit_expansion(records, *, pin_alpha0: bool = False, boundary_model: str = "edge",
                  region: LatticeRegion | None = None, max_condition: float = 1e10) -> FitReport:
    """Least squares for the expansion coefficients.

    Columns are equilibrated and solved by QR.  With ``region`` given, the fit
    also compares alpha2 with both sign conventions and, for rectangles with the
    edge model, subtracts the reflection corner constants to give alpha3.
    """
    records = sorted(records, key=lambda r: r.L)
    Ls = np.array([r.L for r in records], dtype=np.float64)
    if len(set(Ls)) < 6 or Ls.max() / Ls.min() < 8:
        raise ValueError("need at least 6 distinct L with L_max/L_min >= 8")
    y = np.array([r.logdet for r in records], dtype=np.float64)
    n = np.array([r.n_sites for r in records], dtype=np.float64)
    names, M = _design_columns(records, boundary_model)
    labels, B, folded = _reduce_boundary(names, M)

    a0 = None
    if pin_alpha0:
        a0 = alpha0_reference()
        y = y - a0 * n
        cols = [B, np.log(Ls)[:, None], np.ones((len(Ls), 1))]
    else:
        cols = [n[:, None], B, np.log(Ls)[:, None], np.ones((len(Ls), 1))]
    X = np.concatenate(cols, axis=1)
    scale = np.linalg.norm(X, axis=0)
    Xs = X / scale
    sv = np.linalg.svd(Xs, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else math.inf
    if X.shape[1] > len(y) or cond > max_condition:
        raise RankDeficientDesign(
            f"design is rank deficient: condition {cond:.3g}, columns "
            f"{['n'] * (not pin_alpha0) + labels + ['logL', '1']}")
    Q, R = np.linalg.qr(Xs)
    coef = sla.solve_triangular(R, Q.T @ y) / scale
    resid = y - X @ coef
    k = 0
    if not pin_alpha0:
        a0 = float(coef[0])
        k = 1
    beta = {lab: float(c) for lab, c in zip(labels, coef[k:k + len(labels)])}
    alpha2 = float(coef[-2])
    intercept = float(coef[-1])

    report = FitReport(alpha0=float(a0), alpha0_pinned=pin_alpha0, boundary=beta, alpha2=alpha2,
                       alpha3=intercept, intercept=intercept, folded=folded,
                       residuals={int(L): float(r) for L, r in zip(Ls, resid)},
                       residual_rms=float(np.sqrt(np.mean(resid ** 2))),
                       residual_max=float(np.abs(resid).max()), condition=cond,
                       boundary_model=boundary_model)
    if region is not None:
        _annotate(report, region)
    return report


def _is_axis_rectangle(summary) -> bool:
    return (len(summary.corners) == 4
            and all(abs(th - math.pi / 2) < 1e-12 for _, th in summary.corners))


def _annotate(report: FitReport, region: LatticeRegion):
    summary = summarize_geometry(region)
    plus = sum((math.pi ** 2 - th ** 2) / (12 * math.pi * th) for _, th in summary.corners)
    a2 = sum(corner_term(th) for _, th in summary.corners)
    report.alpha2_corner_sum = plus
    report.alpha2_minus_two_a2 = -2 * a2
    if abs(plus + 2 * a2) < 1e-12:
        report.alpha2_verdict = "indistinguishable"
    elif abs(report.alpha2 - plus) < abs(report.alpha2 + 2 * a2):
        report.alpha2_verdict = "+sum(pi^2-theta^2)/(12 pi theta)"
    else:
        report.alpha2_verdict = "-2*a2"
    if report.boundary_model == "edge" and not report.folded and _is_axis_rectangle(summary):
        # a rectangle has no Sigma (no holes); its reference is the rectangle oracle
        xs = [v[0] for v, _ in summary.corners]
        ys = [v[1] for v, _ in summary.corners]
        a = (max(xs) - min(xs)) / region.scale
        b = (max(ys) - min(ys)) / region.scale
        kappa = 4 * right_angle_corner_constant()
        zeta, _ = continuum_zeta_prime_zero(a, b)
        sign = -1.0 if report.alpha2_verdict == "-2*a2" else 1.0
        report.corner_constant = kappa
        report.alpha3 = report.intercept - kappa
        report.alpha3_reference = sign * zeta


# ---------------------------------------------------------------------------
# Sigma-ratio experiment

@dataclass
class RatioTable:
    Ls: list
    differences: list
    deltas: list
    limit: float
    fitted_difference: float
    fit1: FitReport
    fit2: FitReport

    def to_dict(self):
        return {"format": 1, "L": self.Ls, "difference": self.differences, "delta": self.deltas,
                "limit": self.limit, "fitted_difference": self.fitted_difference,
                "alpha3_sigma1": self.fit1.intercept, "alpha3_sigma2": self.fit2.intercept}


def richardson_limit(Ls, values, power: float = 2.0) -> float:
    """Limit of values(L) assuming a leading correction ~ L^-power (last two points)."""
    L1, L2 = Ls[-2], Ls[-1]
    v1, v2 = values[-2], values[-1]
    r = (L2 / L1) ** power
    return (r * v2 - v1) / (r - 1)


def sigma_ratio_experiment(region: LatticeRegion, sigma1, sigma2, Ls, *, records1=None,
                           records2=None, boundary_model: str = "edge") -> RatioTable:
    """logdet differences between two puncture sets across L, plus both fits."""
    recs1 = records1 or sweep(region, sigma1, Ls)
    recs2 = records2 or sweep(region, sigma2, Ls)
    by2 = {r.L: r for r in recs2}
    Lcommon = [r.L for r in sorted(recs1, key=lambda r: r.L) if r.L in by2]
    by1 = {r.L: r for r in recs1}
    diffs = [by1[L].logdet - by2[L].logdet for L in Lcommon]
    deltas = [abs(b - a) for a, b in zip(diffs[:-1], diffs[1:])]
    f1 = fit_expansion(recs1, boundary_model=boundary_model)
    f2 = fit_expansion(recs2, boundary_model=boundary_model)
    return RatioTable(Ls=Lcommon, differences=diffs, deltas=deltas, limit=diffs[-1],
                      fitted_difference=f1.intercept - f2.intercept, fit1=f1, fit2=f2)
