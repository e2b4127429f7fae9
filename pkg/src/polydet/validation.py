"""Acceptance criteria as runnable checks.

Each ``criterion_*`` function returns a :class:`CriterionResult`.  The quick
suite covers the combinatorial checks (matrix-tree, gauge, monodromy); the full
suite runs all twelve, sharing the L-sweeps of the square between 9, 10 and 11.
"""

from __future__ import annotations

import functools
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .asymptotics import (alpha0_lattice_integral, alpha0_quadrature, alpha0_reference,
                          fit_expansion, geometric_grid, sigma_ratio_experiment, sweep)
from .connection import (CUT_DIRECTIONS, build_connection, cycle_monodromy, gauge_transform,
                         random_simple_cycle, scale_punctures, winding_parity)
from .continuum import continuum_zeta_prime_zero, rectangle_kac, rectangle_spectrum
from .geometry import build_graph, make_region
from .spectral import assemble, dense_spectrum, discrete_zeta_prime_zero, heat_kernel_diagonal, logdet
from .walker import mc_dirichlet_kernel

UNIT_SQUARE = [[(0, 0), (1, 0), (1, 1), (0, 1)]]
L_SHAPE = [[(0, 0), (2, 0), (2, 1), (1, 1), (1, 2), (0, 2)]]
ANNULUS = [[(0, 0), (5, 0), (5, 5), (0, 5)], [(2, 2), (3, 2), (3, 3), (2, 3)]]
# hole centre (2.5, 2.5) in doubled coordinates
ANNULUS_SIGMA = [(5, 5)]

# small domains (n <= 12) for the spanning-tree check: (loops, scale)
TREE_DOMAINS = {
    "square-3": (UNIT_SQUARE, 3),
    "square-4": (UNIT_SQUARE, 4),
    "rect-1x2": ([[(0, 0), (2, 0), (2, 1), (0, 1)]], 3),
    "rect-1x3": ([[(0, 0), (3, 0), (3, 1), (0, 1)]], 2),
    "l-shape": (L_SHAPE, 2),
    "triangle": ([[(0, 0), (6, 0), (0, 6)]], 1),
    "annulus": (ANNULUS, 1),
    "plus": ([[(1, 0), (2, 0), (2, 1), (3, 1), (3, 2), (2, 2), (2, 3), (1, 3), (1, 2),
               (0, 2), (0, 1), (1, 1)]], 2),
    "tilted": ([[(0, 0), (3, 1), (2, 3), (-1, 2)]], 1),
    "slit": ([[(0, 0), (4, 0), (4, 4), (0, 4)], [(1, 2), (3, 1), (3, 2)]], 1),
}

SQUARE_LS = geometric_grid(8, 256)
L_SHAPE_LS = geometric_grid(8, 128)
RATIO_LS = geometric_grid(8, 128)


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0
    data: dict = field(default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.number:2d} {self.name}: {self.detail} ({self.seconds:.1f}s)"


def _timed(number, name, budget):
    """Wrap a check returning (ok, detail, data); runtime over ``budget`` fails it."""
    def deco(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            t0 = time.perf_counter()
            ok, detail, data = fn(*args, **kwargs)
            dt = time.perf_counter() - t0
            if dt > budget:
                ok = False
                detail += f"; over runtime budget {budget}s"
            return CriterionResult(number, name, bool(ok), detail, dt, data)
        return run
    return deco


# ---------------------------------------------------------------------------
# oracles

def square_spectrum_logdet(L: int) -> float:
    """Sum of log(4 - 2cos(pi j/L) - 2cos(pi k/L)) over 1 <= j, k < L."""
    c = 2 * np.cos(np.pi * np.arange(1, L) / L)
    mu = 4 - c[:, None] - c[None, :]
    return math.fsum(np.log(mu).ravel())


def bareiss_det(M) -> int:
    """Exact determinant of an integer matrix by fraction-free elimination."""
    A = [[int(x) for x in row] for row in M]
    n = len(A)
    if n == 0:
        return 1
    sign, prev = 1, 1
    for k in range(n - 1):
        if A[k][k] == 0:
            for i in range(k + 1, n):
                if A[i][k] != 0:
                    A[k], A[i] = A[i], A[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                A[i][j] = (A[i][j] * A[k][k] - A[i][k] * A[k][j]) // prev
        prev = A[k][k]
    return sign * A[-1][-1]


def spanning_tree_count(graph) -> int:
    """Kirchhoff count for the graph plus a giant vertex.

    Each site x gets 4 - deg(x) parallel edges to the giant vertex.  The
    cofactor deletes the row and column of site 0 rather than the giant vertex,
    so the matrix differs from the Dirichlet operator.
    """
    n = graph.n
    N = n + 1
    lap = [[0] * N for _ in range(N)]
    for i, j in graph.edges:
        i, j = int(i), int(j)
        lap[i][j] -= 1
        lap[j][i] -= 1
    deg = graph.degrees
    for x in range(n):
        mult = 4 - int(deg[x])
        lap[x][n] -= mult
        lap[n][x] -= mult
    for x in range(N):
        lap[x][x] = -sum(lap[x][y] for y in range(N) if y != x)
    minor = [row[1:] for row in lap[1:]]
    return bareiss_det(minor)


# ---------------------------------------------------------------------------
# criteria

@_timed(1, "exact small determinants", 1.0)
def criterion_exact_small():
    sq = make_region(UNIT_SQUARE)
    d3 = logdet(assemble(build_graph(sq.scaled(3))))
    d11 = logdet(assemble(build_graph(sq.scaled(11))))
    ref11 = square_spectrum_logdet(11)
    e3, e11 = abs(d3 - math.log(192)), abs(d11 - ref11)
    ok = e3 < 1e-12 and e11 < 1e-10
    return ok, f"|L=3 - log 192| = {e3:.1e}, |L=11 - spectrum| = {e11:.1e}", \
        {"logdet3": d3, "logdet11": d11, "ref11": ref11}


@_timed(2, "matrix-tree equivalence", 10.0)
def criterion_matrix_tree():
    rows = {}
    ok = True
    for name, (loops, s) in TREE_DOMAINS.items():
        g = build_graph(make_region(loops).scaled(s))
        count = spanning_tree_count(g)
        det = round(math.exp(logdet(assemble(g))))
        rows[name] = (g.n, count, det)
        ok &= g.n <= 12 and count == det
    bad = [k for k, (_, c, d) in rows.items() if c != d]
    return ok, f"{len(rows) - len(bad)}/{len(rows)} domains exact", {"domains": rows}


def gauge_logdets(L: int = 8, seed: int = 0):
    region = make_region(ANNULUS)
    g = build_graph(region.scaled(L))
    sigma = scale_punctures(region, ANNULUS_SIGMA, L)
    vals = {}
    for cut in CUT_DIRECTIONS:
        vals[cut] = logdet(assemble(g, build_connection(g, sigma, cut)))
    rng = np.random.default_rng(seed)
    vs = rng.choice(np.array([-1, 1], dtype=np.int8), size=g.n)
    vals["vertex"] = logdet(assemble(g, gauge_transform(build_connection(g, sigma), vs)))
    return vals


@_timed(3, "gauge invariance", 5.0)
def criterion_gauge():
    vals = gauge_logdets()
    v = np.array(list(vals.values()))
    spread = float((v.max() - v.min()) / abs(v.mean()))
    return spread < 1e-10, f"relative spread {spread:.1e} over {len(v)} gauges", {"logdets": vals}


MONODROMY_REGIONS = [
    # (loops, scale, punctures in doubled base coordinates)
    (ANNULUS, 4, ANNULUS_SIGMA),
    ([[(0, 0), (7, 0), (7, 3), (0, 3)], [(1, 1), (2, 1), (2, 2), (1, 2)],
      [(5, 1), (6, 1), (6, 2), (5, 2)]], 3, [(3, 3), (11, 3)]),
    ([[(0, 0), (6, 0), (6, 6), (0, 6)], [(2, 2), (4, 2), (4, 4), (2, 4)]], 2, [(5, 5), (7, 7)]),
    (L_SHAPE, 6, []),
]


def monodromy_trials(cycles: int = 200, seed: int = 0):
    rng = np.random.default_rng(seed)
    out = []
    for loops, L, pts in MONODROMY_REGIONS:
        base = make_region(loops)
        region = base.scaled(L)
        g = build_graph(region)
        sigma = scale_punctures(base, pts, L)
        conn = build_connection(g, sigma)
        agree = odd = done = 0
        while done < cycles:
            cyc = random_simple_cycle(g, rng)
            if cyc is None:
                continue
            pts_c = [tuple(g.vertices[i]) for i in cyc]
            m = cycle_monodromy(conn, cyc)
            w = winding_parity(sigma, pts_c)
            agree += m == w
            odd += w == -1
            done += 1
        out.append({"L": L, "cycles": done, "agree": agree, "odd": odd})
    return out


@_timed(4, "monodromy law", 5.0)
def criterion_monodromy():
    trials = monodromy_trials()
    ok = all(t["agree"] == t["cycles"] for t in trials)
    total = sum(t["cycles"] for t in trials)
    agree = sum(t["agree"] for t in trials)
    odd = sum(t["odd"] for t in trials)
    return ok, f"{agree}/{total} cycles agree ({odd} with odd winding)", {"trials": trials}


def dense_instances():
    """(label, operator) for the dense-path instances used by the zeta identity."""
    sq = make_region(UNIT_SQUARE)
    out = [(f"square-{L}", assemble(build_graph(sq.scaled(L)))) for L in (2, 3, 5, 8, 11, 16)]
    ann = make_region(ANNULUS)
    for L in (2, 4):
        g = build_graph(ann.scaled(L))
        out.append((f"annulus-{L}", assemble(g, build_connection(g, scale_punctures(ann, ANNULUS_SIGMA, L)))))
        out.append((f"annulus-{L}-untwisted", assemble(g)))
    lsh = make_region(L_SHAPE)
    out.append(("l-shape-6", assemble(build_graph(lsh.scaled(6)))))
    for loops, s in TREE_DOMAINS.values():
        out.append(("small", assemble(build_graph(make_region(loops).scaled(s)))))
    return out


@_timed(5, "discrete zeta identity", 30.0)
def criterion_zeta_identity():
    worst, rows = 0.0, {}
    for label, op in dense_instances():
        mu = dense_spectrum(op)
        err = abs(discrete_zeta_prime_zero(mu) + logdet(op))
        worst = max(worst, err)
        rows[label] = err
    return worst < 1e-8, f"max |zeta'(0) + logdet| = {worst:.1e} over {len(rows)} instances", \
        {"errors": rows}


def mc_triples(count: int = 100, seed: int = 0):
    rng = np.random.default_rng(seed)
    sq = make_region(UNIT_SQUARE)
    ann = make_region(ANNULUS)
    lsh = make_region(L_SHAPE)
    setups = []
    for region, L, sig in ((sq, 5, None), (sq, 8, None), (lsh, 3, None),
                           (ann, 1, ANNULUS_SIGMA), (ann, 2, ANNULUS_SIGMA)):
        g = build_graph(region.scaled(L))
        conn = build_connection(g, scale_punctures(region, sig, L) if sig else None)
        setups.append((g, conn, assemble(g, conn)))
    for _ in range(count):
        g, conn, op = setups[int(rng.integers(len(setups)))]
        xi = int(rng.integers(g.n))
        t = float(rng.uniform(0.1, 3.0))
        yield g, conn, op, xi, t


@_timed(6, "MC kernel consistency", 600.0)
def criterion_mc(samples: int = 100_000, count: int = 100):
    hits = 0
    worst = 0.0
    cache = {}
    for k, (g, conn, op, xi, t) in enumerate(mc_triples(count)):
        key = (id(op), t)
        if key not in cache:
            cache[key] = heat_kernel_diagonal(op, t)
        exact = cache[key][xi]
        est = mc_dirichlet_kernel(g, conn, g.vertices[xi], t, samples, seed=1000 + k)
        z = abs(est.mean - exact) / est.stderr if est.stderr > 0 else \
            (0.0 if abs(est.mean - exact) < 1e-12 else math.inf)
        worst = max(worst, z)
        hits += z <= 3
    need = math.ceil(0.99 * count)
    return hits >= need, f"{hits}/{count} within 3 SE (max z {worst:.2f})", {"hits": hits}


@_timed(7, "Kac expansion", 1.0)
def criterion_kac(t: float = 0.05):
    k = rectangle_kac(1.0, 1.0)
    lam = rectangle_spectrum(1.0, 1.0, 80.0 / t).eigenvalues
    tr = math.fsum(np.exp(-t * lam))
    rem = abs(tr - k.a0 / t - k.a1 / math.sqrt(t) - k.a2)
    return rem < 1e-6, f"|remainder| at t={t} = {rem:.1e}", {"remainder": rem}


@_timed(8, "continuum rescaling", 10.0)
def criterion_rescaling():
    z1, e1 = continuum_zeta_prime_zero(1.0, 1.0)
    z2, e2 = continuum_zeta_prime_zero(2.0, 2.0)
    err = abs((z2 - z1) - 0.5 * math.log(2))
    return err < 1e-7, f"|difference - log2/2| = {err:.1e}", {"zeta1": z1, "zeta2": z2}


@functools.lru_cache(maxsize=None)
def square_sweep(Ls: tuple = tuple(SQUARE_LS)):
    return tuple(sweep(make_region(UNIT_SQUARE), None, list(Ls)))


@functools.lru_cache(maxsize=None)
def l_shape_sweep(Ls: tuple = tuple(L_SHAPE_LS)):
    return tuple(sweep(make_region(L_SHAPE), None, list(Ls)))


@_timed(9, "alpha0 dual oracle", 600.0)
def criterion_alpha0():
    q, lat = alpha0_quadrature(), alpha0_lattice_integral()
    ref = alpha0_reference()
    fit = fit_expansion(square_sweep(), region=make_region(UNIT_SQUARE))
    d_or, d_fit = abs(q - lat), abs(fit.alpha0 - ref)
    ok = d_or < 1e-8 and d_fit < 1e-3
    return ok, f"|quad - lattice| = {d_or:.1e}, |fit - ref| = {d_fit:.1e} (L <= {max(SQUARE_LS)})", \
        {"quadrature": q, "lattice": lat, "fitted": fit.alpha0}


@_timed(10, "corner-log magnitude", 900.0)
def criterion_alpha2():
    sq = make_region(UNIT_SQUARE)
    lsh = make_region(L_SHAPE)
    fsq = fit_expansion(square_sweep(), pin_alpha0=True, region=sq)
    fl = fit_expansion(l_shape_sweep(), pin_alpha0=True, region=lsh)
    target_l = abs(fl.alpha2_minus_two_a2)
    ok_sq = 0.45 <= abs(fsq.alpha2) <= 0.55
    # same half-width as the square's band
    ok_l = abs(abs(fl.alpha2) - target_l) <= 0.05
    detail = (f"square alpha2 = {fsq.alpha2:+.4f} (verdict {fsq.alpha2_verdict}), "
              f"L-shape alpha2 = {fl.alpha2:+.4f} vs |5/9| = {target_l:.4f} (verdict {fl.alpha2_verdict})")
    return ok_sq and ok_l, detail, {"square": fsq.to_dict(), "l_shape": fl.to_dict()}


@_timed(11, "alpha3 vs continuum", 900.0)
def criterion_alpha3():
    fsq = fit_expansion(square_sweep(), pin_alpha0=True, region=make_region(UNIT_SQUARE))
    if fsq.alpha3_reference is None:
        return False, "no continuum reference for this fit", {}
    err = abs(fsq.alpha3 - fsq.alpha3_reference)
    detail = (f"alpha3 = {fsq.alpha3:+.5f} (intercept {fsq.intercept:+.5f} minus corner constants "
              f"{fsq.corner_constant:.5f}) vs {fsq.alpha3_reference:+.5f}, |diff| = {err:.1e}")
    return err < 1e-2, detail, {"fit": fsq.to_dict()}


@_timed(12, "Sigma ratio", 900.0)
def criterion_sigma_ratio(Ls=tuple(RATIO_LS)):
    tab = sigma_ratio_experiment(make_region(ANNULUS), ANNULUS_SIGMA, [], list(Ls))
    last_delta = tab.deltas[-1]
    gap = abs(tab.limit - tab.fitted_difference)
    ok = last_delta < 5e-3 and gap < 2e-2
    return ok, (f"last delta {last_delta:.1e} at L={tab.Ls[-1]}, limit {tab.limit:.3e} vs fitted "
                f"{tab.fitted_difference:.3e}"), tab.to_dict()


QUICK = (criterion_matrix_tree, criterion_gauge, criterion_monodromy)
FULL = (criterion_exact_small, criterion_matrix_tree, criterion_gauge, criterion_monodromy,
        criterion_zeta_identity, criterion_mc, criterion_kac, criterion_rescaling,
        criterion_alpha0, criterion_alpha2, criterion_alpha3, criterion_sigma_ratio)


def run_suite(name: str, echo=print) -> list[CriterionResult]:
    checks = {"quick": QUICK, "full": FULL}[name]
    results = []
    for check in checks:
        res = check()
        if echo:
            echo(res.line())
        results.append(res)
    return results

