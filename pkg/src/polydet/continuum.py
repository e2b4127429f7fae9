"""Continuum oracles: Kac coefficients, rectangle heat traces and zeta'(0)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .geometry import GeometrySummary

EULER_GAMMA = 0.57721566490153286061
T_SPLIT = math.exp(-EULER_GAMMA)


@dataclass(frozen=True)
class KacCoefficients:
    a0: float
    a1: float
    a2: float


def corner_term(theta: float) -> float:
    """Corner contribution (pi^2 - theta^2) / (24 pi theta) to a2."""
    return (math.pi ** 2 - theta ** 2) / (24 * math.pi * theta)


def kac_coefficients(summary: GeometrySummary) -> KacCoefficients:
    return KacCoefficients(
        a0=float(summary.area) / (4 * math.pi),
        a1=-summary.perimeter / (8 * math.sqrt(math.pi)),
        a2=sum(corner_term(th) for _, th in summary.corners),
    )


def rectangle_kac(a: float, b: float) -> KacCoefficients:
    return KacCoefficients(a * b / (4 * math.pi), -(a + b) / (4 * math.sqrt(math.pi)), 0.25)


def _side_split(ell: float, t: float):
    """S(ell) = sum_{m>=1} exp(-t pi^2 m^2 / ell^2) as (smooth part, exponentially small part).

    Poisson summation gives S = (ell / sqrt(pi t) - 1) / 2 + (ell / sqrt(pi t)) sum_k e^{-k^2 ell^2/t}.
    """
    c = ell / math.sqrt(math.pi * t)
    kmax = int(math.sqrt(40.0 * t) / ell) + 2
    k = np.arange(1, kmax + 1)
    return 0.5 * (c - 1.0), c * float(np.exp(-(k * ell) ** 2 / t).sum())


def _side_direct(ell: float, t: float) -> float:
    s = t * math.pi ** 2 / ell ** 2
    mmax = int(math.sqrt(40.0 / s)) + 2
    m = np.arange(1, mmax + 1)
    return float(np.exp(-s * m ** 2).sum())


def side_sum(ell: float, t: float) -> float:
    """S(ell) with the Poisson switch at t pi^2 / ell^2 = 1."""
    if t * math.pi ** 2 / ell ** 2 < 1:
        smooth, small = _side_split(ell, t)
        return smooth + small
    return _side_direct(ell, t)


def rectangle_heat_trace(a: float, b: float, t: float) -> float:
    """Tr exp(-t Delta) for the Dirichlet Laplacian on an a x b rectangle."""
    if min(a, b, t) <= 0:
        raise ValueError("a, b, t must be positive")
    return side_sum(a, t) * side_sum(b, t)


def rectangle_heat_trace_direct(a: float, b: float, t: float, cutoff: float | None = None) -> float:
    """Sum of exp(-t lambda) over the explicit spectrum below ``cutoff``."""
    cutoff = cutoff or 60.0 / t
    lam = rectangle_spectrum(a, b, cutoff).eigenvalues
    return float(np.exp(-t * lam).sum())


def kac_remainder(a: float, b: float, t: float) -> float:
    """Tr - a0/t - a1/sqrt(t) - a2, computed without cancellation for small t."""
    if t * math.pi ** 2 / max(a, b) ** 2 < 1:
        sa, ea = _side_split(a, t)
        sb, eb = _side_split(b, t)
        return sa * eb + ea * sb + ea * eb
    k = rectangle_kac(a, b)
    return rectangle_heat_trace(a, b, t) - k.a0 / t - k.a1 / math.sqrt(t) - k.a2


@dataclass(frozen=True)
class RectangleSpectrum:
    a: float
    b: float
    cutoff: float
    eigenvalues: np.ndarray

    def counting(self, lam: float) -> int:
        return int(np.searchsorted(self.eigenvalues, lam, side="right"))


def rectangle_spectrum(a: float, b: float, cutoff: float) -> RectangleSpectrum:
    """Eigenvalues pi^2 (m^2/a^2 + n^2/b^2) <= cutoff, sorted."""
    mmax = int(a * math.sqrt(cutoff) / math.pi) + 1
    nmax = int(b * math.sqrt(cutoff) / math.pi) + 1
    m = np.arange(1, mmax + 1)[:, None]
    n = np.arange(1, nmax + 1)[None, :]
    lam = (math.pi ** 2 * (m ** 2 / a ** 2 + n ** 2 / b ** 2)).ravel()
    return RectangleSpectrum(a, b, cutoff, np.sort(lam[lam <= cutoff]))


def rectangle_F(a: float, b: float, t: float) -> float:
    """Heat trace minus its small-time expansion, a2 windowed to [0, e^{-gamma}]."""
    rem = kac_remainder(a, b, t)
    return rem + (0.25 if t > T_SPLIT else 0.0)


def continuum_zeta_prime_zero(a: float, b: float, tol: float = 1e-12):
    """zeta'(0) of the Dirichlet Laplacian on an a x b rectangle.

    Integrates F(t)/t over (0, inf) in u = log t with breakpoints at the window
    edge.  Returns (value, error bound); the bound combines quadrature error
    estimates with the change under tolerance halving.
    """
    if a <= 0 or b <= 0:
        raise ValueError("side lengths must be positive")

    def run(eps):
        total, err = 0.0, 0.0
        scale = max(a, b) ** 2
        # below u_lo F is exp(-min(a,b)^2/t)-small; above u_hi it is ~ a0/t.
        # u_lo must also sit below the window edge, where F jumps by a2
        u_lo = min(math.log(min(a, b) ** 2 / 80.0), -EULER_GAMMA - 1.0)
        u_hi = math.log(scale * 200.0)
        knots = sorted({u_lo, -EULER_GAMMA, math.log(scale / math.pi ** 2), u_hi})
        knots = [k for k in knots if u_lo <= k <= u_hi]
        grid = []
        for lo, hi in zip(knots[:-1], knots[1:]):
            grid.extend(np.linspace(lo, hi, 5)[:-1])
        grid.append(u_hi)
        for lo, hi in zip(grid[:-1], grid[1:]):
            val, e = quad(lambda u: rectangle_F(a, b, math.exp(u)), lo, hi,
                          epsabs=eps, epsrel=eps, limit=200)
            total += val
            err += e
        # tail beyond u_hi: Tr is e^{-lambda_1 t}-small, F ~ -a0/t - a1/sqrt(t)
        k = rectangle_kac(a, b)
        T = math.exp(u_hi)
        tail = -k.a0 / T - 2 * k.a1 / math.sqrt(T)
        if not math.isfinite(total):
            raise ArithmeticError("divergent zeta integral")
        return total + tail, err

    v1, e1 = run(tol)
    v2, e2 = run(tol / 2)
    return v2, e1 + e2 + abs(v2 - v1)


def half_plane_defect(x_perp: float, t: float) -> float:
    """Half-plane Dirichlet kernel minus the free kernel on the diagonal."""
    if x_perp < 0 or t <= 0:
        raise ValueError("need x_perp >= 0 and t > 0")
    return -math.exp(-x_perp ** 2 / t) / (4 * math.pi * t)


def half_plane_defect_integral(width: float, t: float) -> float:
    """Integral of the defect over a width x infinity strip (by quadrature)."""
    val, _ = quad(half_plane_defect, 0, math.inf, args=(t,), epsabs=1e-14, epsrel=1e-12)
    return width * val
