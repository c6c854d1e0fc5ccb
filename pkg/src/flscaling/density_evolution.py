"""Infinite-blocklength analysis of the peeling decoder.

Tracks the residual degree profile along decoding, parametrized by the
right-to-left erasure fraction x_l.  All profile quantities are normalized
per variable node.  The threshold is the largest erasure probability for
which the fraction of degree-one checks stays positive along the whole
trajectory; the critical point is where it first touches zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize_scalar

from .ensembles import EnsembleSpec

__all__ = [
    "DeProfile",
    "CriticalData",
    "MarginallyStableError",
    "profile_at",
    "threshold",
    "critical_data",
    "asymptotic_bit_curve",
]

THRESHOLD_TOL = 1e-7
_GRID = np.concatenate([np.geomspace(1e-12, 1e-2, 400), np.linspace(1e-2, 1.0, 10000)])


class MarginallyStableError(ValueError):
    """The critical point sits at x* = 0; Q-function scaling does not apply."""


@dataclass(frozen=True)
class DeProfile:
    """Residual degree profile at one point of the decoding trajectory.

    L[i] are residual variable-node fractions per degree, R1/R[i] the check
    fractions.  nu, sigma, tau are the residual size, degree-one check
    fraction and degree>=2 check fraction, all per variable node.
    """

    eps: float
    x_l: float
    x_r: float
    nu: float
    sigma: float
    tau: float
    L: dict[int, float]
    R0: float
    R1: float
    R: dict[int, float]


def _check_node_fracs(spec: EnsembleSpec) -> dict[int, float]:
    # check nodes of each degree per variable node
    if spec.kind == "standard":
        lbar = spec.lam.avg_node_degree
        return {d: lbar * c / d for d, c in spec.rho.coeffs}
    raise AssertionError("poisson handled separately")


def profile_at(spec: EnsembleSpec, eps: float, x_l: float) -> DeProfile:
    """Evaluate the residual degree profile at erasure eps and state x_l."""
    if not (0.0 <= eps <= 1.0 and 0.0 <= x_l <= 1.0):
        raise ValueError("eps and x_l must lie in [0, 1]")
    lam = spec.lam
    x_r = eps * float(lam(x_l)) if x_l > 0 else 0.0
    lbar = lam.avg_node_degree
    nu = eps * float(lam.node_poly(x_l))
    sigma = lbar * x_r * (x_l - 1.0 + float(spec.rho_fn(1.0 - x_r)))
    L = {d: eps * v * x_l ** d for d, v in lam.node_fractions().items()}
    R: dict[int, float] = {}
    if spec.kind == "standard":
        for j, gj in _check_node_fracs(spec).items():
            for i in range(2, j + 1):
                R[i] = R.get(i, 0.0) + gj * math.comb(j, i) * x_r ** i * (1.0 - x_r) ** (j - i)
        tau = float(sum(R.values()))
        total_checks = spec.rbar
    else:
        z = spec.poisson_check_mean * x_r
        rb = spec.rbar
        tau = rb * float(-np.expm1(-z) - z * np.exp(-z))
        # truncate the Poisson residual-degree tail once it is negligible
        i = 2
        pmf = z * z / 2.0 * np.exp(-z)
        while pmf > 1e-16 and i < 10000:
            R[i] = rb * pmf
            i += 1
            pmf *= z / i
        total_checks = rb
    R0 = total_checks - sigma - tau
    return DeProfile(eps=eps, x_l=x_l, x_r=x_r, nu=nu, sigma=sigma, tau=tau,
                     L=L, R0=R0, R1=sigma, R=R)


def _gap(spec: EnsembleSpec, eps: float, x):
    # rho(1 - eps lam(x)) - (1 - x); positive iff decoding proceeds at x.
    # Written as (rho(1-w) - 1) + x to stay accurate as x -> 0.
    x = np.asarray(x)
    return spec.rho_fn_m1(eps * spec.lam(x)) + x


def _min_gap(spec: EnsembleSpec, eps: float) -> tuple[float, float]:
    """Minimum of the gap over (0, 1] and its refined location."""
    g = _gap(spec, eps, _GRID)
    i = int(np.argmin(g))
    lo = _GRID[max(i - 1, 0)]
    hi = _GRID[min(i + 1, len(_GRID) - 1)]
    res = minimize_scalar(lambda x: float(_gap(spec, eps, x)),
                          bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-13})
    if res.fun < g[i]:
        return float(res.fun), float(res.x)
    return float(g[i]), float(_GRID[i])


@lru_cache(maxsize=256)
def threshold(spec: EnsembleSpec) -> float:
    """Decoding threshold: sup of eps keeping the gap positive on (0, 1]."""
    lo, hi = 0.0, 1.0
    while hi - lo > THRESHOLD_TOL:
        mid = 0.5 * (lo + hi)
        gmin, _ = _min_gap(spec, mid)
        if gmin > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class CriticalData:
    eps_star: float
    x_star: float
    nu_star: float
    dsigma_deps: float


def dsigma_deps_at(spec: EnsembleSpec, eps: float, x: float) -> float:
    """Partial of sigma in eps at fixed x_l (exact at the critical point)."""
    lam_x = float(spec.lam(x))
    return -spec.lam.avg_node_degree * eps * lam_x ** 2 * float(spec.rho_prime(1.0 - eps * lam_x))


def _stability_product(spec: EnsembleSpec, eps: float) -> float:
    # eps lam'(0) rho'(1); at or above one the threshold comes from x -> 0
    lam_p0 = spec.lam.coeff(2)
    return eps * lam_p0 * float(spec.rho_prime(1.0))


@lru_cache(maxsize=256)
def critical_data(spec: EnsembleSpec) -> CriticalData:
    """Threshold, critical point, residual size and sensitivity there.

    Raises MarginallyStableError when the threshold is set by the stability
    condition (critical point at x = 0).  The interior minimizer is located
    by probing slightly above the threshold, where the critical dip of the
    gap is strictly negative and cannot be confused with the benign decay
    of the gap toward x = 0.
    """
    eps_star = threshold(spec)
    # margin covers the bisection tolerance of eps_star itself
    if _stability_product(spec, eps_star) >= 1.0 - 1e-5:
        raise MarginallyStableError(
            "threshold is determined by the stability condition; "
            "use the cycle-ensemble machinery instead")
    eps_probe = min(eps_star + 1e-4, 1.0)
    g = _gap(spec, eps_probe, _GRID)
    i = int(np.argmin(g))
    x_dip = float(_GRID[i])
    lo = max(0.5 * x_dip, 1e-6)
    hi = min(1.5 * x_dip, 1.0)
    res = minimize_scalar(lambda x: float(_gap(spec, eps_star, x)),
                          bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-13})
    x_star = float(res.x)
    residual = abs(float(_gap(spec, eps_star, x_star)))
    if residual > 1e-5:
        raise RuntimeError(f"critical root residual {residual:.2e} above tolerance")
    nu_star = eps_star * float(spec.lam.node_poly(x_star))
    dsde = dsigma_deps_at(spec, eps_star, x_star)
    if not dsde < 0:
        raise RuntimeError("sensitivity dsigma/deps is not negative at the critical point")
    return CriticalData(eps_star=eps_star, x_star=x_star, nu_star=nu_star, dsigma_deps=dsde)


def asymptotic_bit_curve(spec: EnsembleSpec, xs) -> list[tuple[float, float]]:
    """Residual bit erasure curve above threshold, in parametric form.

    The parameter x is the left-to-right erasure probability of the stable
    decoding fixed point; each x in (x_fp*, 1] maps to a channel value
    eps(x) and the corresponding residual erasure fraction.
    """
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    eps_star = threshold(spec)
    try:
        cd = critical_data(spec)
        x_fp_star = cd.eps_star * float(spec.lam(cd.x_star))
    except MarginallyStableError:
        x_fp_star = 0.0
    out = []
    for x in xs:
        if not (0.0 < x <= 1.0):
            raise ValueError("curve parameter must lie in (0, 1]")
        # slack covers the tolerance of the critical-point estimate
        if x <= x_fp_star - 1e-6:
            raise ValueError(f"x={x} is below the stable fixed-point branch")
        y = 1.0 - float(spec.rho_fn(1.0 - x))
        lam_y = float(spec.lam(y))
        if lam_y <= 0.0:
            raise ValueError(f"x={x} is outside the decodable branch")
        eps = x / lam_y
        if eps < eps_star - 1e-6:
            raise ValueError(f"x={x} maps below the threshold; not a stable fixed point")
        pb = eps * float(spec.lam.node_poly(y))
        out.append((eps, pb))
    return out
