"""Waterfall-region scaling laws: Q-forms, exact random-code benchmark, fits.

The refined law shifts the threshold by beta * n^(-2/3) and scales the gap
by sqrt(n)/alpha inside a Q-function; the basic law is the beta = 0 case.
Fitting goes the other way: recover (alpha, beta) from an empirical curve
by weighted least squares.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import ndtr

__all__ = [
    "ScalingForm",
    "q_function",
    "predict_curve",
    "shannon_exact",
    "fit_alpha_beta",
    "UnfittableError",
    "FitResult",
]


class UnfittableError(ValueError):
    """The empirical curve carries no information about the parameters."""


def q_function(z):
    """Upper tail of the standard normal distribution."""
    return ndtr(-np.asarray(z, dtype=float))


@dataclass(frozen=True)
class ScalingForm:
    """Parameters of a finite-length waterfall law.

    kind "refined" applies the n^(-2/3) threshold shift; "basic" pins the
    shift to zero.  nu_star, when given, scales block predictions into bit
    predictions.
    """

    eps_star: float
    alpha: float
    n: int
    beta: float = 0.0
    kind: str = "refined"
    nu_star: float | None = None

    def __post_init__(self):
        if self.alpha <= 0.0:
            raise ValueError("alpha must be positive")
        if self.n < 1:
            raise ValueError("n must be positive")
        if self.kind not in ("basic", "refined"):
            raise ValueError(f"unknown scaling kind {self.kind!r}")

    @property
    def shift(self) -> float:
        if self.kind == "basic":
            return 0.0
        return self.beta * self.n ** (-2.0 / 3.0)


def predict_curve(form: ScalingForm, eps_grid) -> list[tuple[float, ...]]:
    """Predicted block (and bit, when nu_star is set) erasure probabilities."""
    eps = np.atleast_1d(np.asarray(eps_grid, dtype=float))
    z = np.sqrt(form.n) * (form.eps_star - form.shift - eps) / form.alpha
    pb = q_function(z)
    if form.nu_star is None:
        return [(float(e), float(p)) for e, p in zip(eps, pb)]
    return [(float(e), float(p), float(form.nu_star * p)) for e, p in zip(eps, pb)]


def _log_binom_pmf(n: int, eps: float) -> np.ndarray:
    k = np.arange(n + 1, dtype=float)
    if eps <= 0.0:
        out = np.full(n + 1, -np.inf)
        out[0] = 0.0
        return out
    if eps >= 1.0:
        out = np.full(n + 1, -np.inf)
        out[n] = 0.0
        return out
    lg = math.lgamma(n + 1)
    return (lg - np.array([math.lgamma(kk + 1) + math.lgamma(n - kk + 1) for kk in k])
            + k * math.log(eps) + (n - k) * math.log1p(-eps))


def shannon_exact(n: int, r: float, eps_grid) -> list[tuple[float, float, float]]:
    """Exact average block erasure of the random parity-check ensemble.

    A block fails unless the erased columns form a full-rank submatrix; the
    rank deficiency probability product telescopes over the erasure count.
    Returns (eps, exact, q_approximation) rows; the threshold is 1 - r.
    """
    mr = n * (1.0 - r)
    if abs(mr - round(mr)) > 1e-9:
        raise ValueError("n (1 - r) must be an integer")
    mr = int(round(mr))
    # p_fullrank[E] = prod_{i<E} (1 - 2^(i - mr))
    p_fullrank = np.ones(n + 1)
    for E in range(1, n + 1):
        if E > mr:
            p_fullrank[E] = 0.0
        else:
            p_fullrank[E] = p_fullrank[E - 1] * -math.expm1((E - 1 - mr) * math.log(2.0))
    eps_star = 1.0 - r
    out = []
    for eps in np.atleast_1d(np.asarray(eps_grid, dtype=float)):
        logw = _log_binom_pmf(n, float(eps))
        w = np.exp(logw)
        exact = float(np.sum(w * (1.0 - p_fullrank)))
        qapp = float(q_function(math.sqrt(n) * (eps_star - eps)
                                / math.sqrt(eps_star * (1.0 - eps_star))))
        out.append((float(eps), exact, qapp))
    return out


@dataclass(frozen=True)
class FitResult:
    alpha: float
    beta: float
    residual: float


def fit_alpha_beta(eps, p_hat, se, eps_star: float, n: int,
                   beta_fixed: float | None = None,
                   x0=(0.25, 0.6)) -> FitResult:
    """Weighted least-squares fit of the refined law to an empirical curve.

    Only points with probabilities strictly inside (0, 1) constrain the
    parameters; at least four are required.  Derivative-free simplex with
    restarts; weights are inverse squared standard errors (floored to keep
    zero-error points usable).
    """
    eps = np.asarray(eps, dtype=float)
    p_hat = np.asarray(p_hat, dtype=float)
    se = np.asarray(se, dtype=float)
    keep = (p_hat > 0.0) & (p_hat < 1.0)
    if int(keep.sum()) < 4:
        raise UnfittableError("need at least four informative points in (0, 1)")
    eps, p_hat, se = eps[keep], p_hat[keep], se[keep]
    w = 1.0 / np.maximum(se, 1e-6) ** 2
    sqn = math.sqrt(n)
    n23 = n ** (-2.0 / 3.0)

    def loss(theta):
        a = theta[0]
        b = beta_fixed if beta_fixed is not None else theta[1]
        if a <= 1e-6:
            return 1e18
        pred = q_function(sqn * (eps_star - b * n23 - eps) / a)
        return float(np.sum(w * (pred - p_hat) ** 2))

    best = None
    starts = [np.asarray(x0, dtype=float),
              np.asarray([x0[0] * 2.0, x0[1] - 0.5]),
              np.asarray([x0[0] * 0.5, x0[1] + 0.5])]
    for s0 in starts:
        t0 = s0[:1] if beta_fixed is not None else s0
        res = minimize(loss, t0, method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-16,
                                "maxiter": 20000, "maxfev": 20000})
        if best is None or res.fun < best.fun:
            best = res
    a = float(best.x[0])
    b = float(beta_fixed if beta_fixed is not None else best.x[1])
    return FitResult(alpha=a, beta=b, residual=float(best.fun))
