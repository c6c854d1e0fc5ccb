"""Exact and scaling-law block/bit formulas for cycle poisson ensembles.

For degree-two variables the Tanner graph projects to a multigraph on the
check nodes with one edge per erased variable; the decoder succeeds iff
that multigraph is a forest.  Counting labeled forests therefore gives the
block erasure probability in closed form, and its critical-window limit is
governed by a one-sided stable density.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad

__all__ = [
    "ForestTable",
    "forest_count",
    "log_forest_count",
    "exact_block_prob",
    "stable_density_p",
    "mother_curve_f",
    "block_scaling_approx",
    "limit_block_curve",
    "error_floor_bit",
    "CycleScalingParams",
    "cycle_params",
]

EXACT_FOREST_MAX = 256  # the big-integer table costs O(l^3) huge-int work


class ForestTable:
    """Memoized exact counts F(l, k) of labeled forests, k components.

    Rows are built on demand; built once and then read-only.
    """

    def __init__(self):
        self._rows: list[list[int]] = [[1]]  # F(0, 0) = 1

    def count(self, l: int, k: int) -> int:
        if k < 0 or k > l:
            return 0
        if l > EXACT_FOREST_MAX:
            raise ValueError(f"exact forest table limited to l <= {EXACT_FOREST_MAX}")
        while len(self._rows) <= l:
            self._extend_row()
        return self._rows[l][k]

    def _extend_row(self):
        l = len(self._rows)
        row = [0] * (l + 1)
        row[l] = 1
        for k in range(1, l):
            tot = 0
            # first component contains node 1 and has j nodes
            for j in range(1, l - k + 2):
                tj = 1 if j <= 2 else j ** (j - 2)
                tot += math.comb(l - 1, j - 1) * tj * self._rows[l - j][k - 1]
            row[k] = tot
        if l >= 1:
            row[0] = 0
        self._rows.append(row)


_TABLE = ForestTable()


def forest_count(l: int, k: int) -> int:
    """Exact number of forests on l labeled nodes with k components."""
    if l < 1:
        raise ValueError("l must be positive")
    return _TABLE.count(l, k)


@lru_cache(maxsize=4096)
def log_forest_count(l: int, k: int) -> float:
    """log F(l, k) for large l, via powers of the scaled tree generating series.

    F(l, k) = (l!/k!) [x^l] U(x)^k with U the labeled-tree exponential
    generating series.  Substituting x -> x/e keeps the series coefficients
    bounded, and repeated squaring with per-step renormalization keeps the
    convolution inside double range.
    """
    if k < 0 or k > l:
        return -math.inf
    if k == l:
        return 0.0
    logu = np.full(l + 1, -np.inf)
    for j in range(1, l + 1):
        logu[j] = (j - 2) * math.log(j) - math.lgamma(j + 1) - j
    top = logu[1:].max()
    base_scale = top
    base = np.exp(np.concatenate(([-np.inf], logu[1:])) - top)
    base[0] = 0.0

    def mul(a, b):
        (la, ca), (lb, cb) = a, b
        c = np.convolve(ca, cb)[: l + 1]
        mx = c.max()
        return (la + lb + math.log(mx), c / mx)

    result = None
    cur = (base_scale, base)
    e = k
    while e > 0:
        if e & 1:
            result = cur if result is None else mul(result, cur)
        e >>= 1
        if e:
            cur = mul(cur, cur)
    lr, cr = result
    if cr[l] <= 0.0:
        return -math.inf
    return math.lgamma(l + 1) - math.lgamma(k + 1) + lr + math.log(cr[l]) + l


def _m_checks(n: int, r: float) -> int:
    m = n * (1.0 - r)
    if abs(m - round(m)) > 1e-9:
        raise ValueError(f"n * (1 - r) = {m} is not an integer")
    return int(round(m))


def exact_block_prob(n: int, r: float, E: int) -> float:
    """Unexpurgated block erasure probability with exactly E erasures.

    Success requires the E projected edges to form a forest on the m check
    nodes.  Each forest is realized by E! assignments of variables to edges
    and 2^E socket orderings, out of m^(2E) equiprobable constellations.
    """
    if E < 0:
        raise ValueError("erasure count must be nonnegative")
    m = _m_checks(n, r)
    if E > m:
        return 1.0
    if m <= EXACT_FOREST_MAX:
        from fractions import Fraction
        f = forest_count(m, m - E) if E < m else 0
        p_succ = Fraction(2 ** E * math.factorial(E) * f, m ** (2 * E))
        return float(1 - p_succ)
    logp = (E * math.log(2.0) + math.lgamma(E + 1)
            + log_forest_count(m, m - E) - 2 * E * math.log(m))
    return float(-math.expm1(min(logp, 0.0)))


# ---------------------------------------------------------------------------
# stable density and the critical-window mother curve

_STABLE_INDEX = 1.5
_COS_SCALE = 1.0 / math.sqrt(2.0)  # cos(pi/4) from the skew term at index 3/2
_T_CUT = 40.0  # exp(-t^{3/2}/sqrt2) < 1e-77 past here
_MP_SWITCH = -4.5   # below this the float integral cancels past double range
_ASYM_SWITCH = -9.0  # below this the saddle asymptote is accurate to ~3e-4


def _stable_p_highprec(u: float) -> float:
    """Light-tail evaluation in adaptive extended precision.

    The density decays like exp(-4|u|^3/27) as u -> -infinity while the
    Fourier integrand stays O(1), so the working precision must cover the
    full cancellation.
    """
    from mpmath import mp, mpf, workdps
    from mpmath import cos as mcos, exp as mexp, pi as mpi
    from mpmath import quad as mquad, sqrt as msqrt

    au = abs(u)
    dps = 30 + int(4.0 * au ** 3 / 27.0 / math.log(10.0)) + 10
    with workdps(dps):
        s2 = 1 / msqrt(2)
        uu = mpf(u)
        three_half = mpf(3) / 2

        def integrand(t):
            return mexp(-t ** three_half * s2) * mcos(t * uu + t ** three_half * s2)

        npanels = max(40, int(14 * (au + 2)))
        pts = [mpf(40) * k / npanels for k in range(npanels + 1)]
        val = mquad(integrand, pts) / mpi
        return float(val)


def stable_density_p(u: float, accuracy_warn: float = 1e-6) -> float:
    """Density p(u; 3/2, -1) by quadrature of its Fourier representation.

    Conjugate symmetry halves the integral to t >= 0, where it splits into
    cos(t u) and sin(t u) weighted pieces handled by oscillatory quadrature.
    Deep in the light tail the evaluation switches to extended precision,
    then to the saddle-point form once that is accurate past any other
    error in play.
    """
    if u < _ASYM_SWITCH:
        au = -u
        return (2.0 / (3.0 * math.sqrt(math.pi)) * math.sqrt(au)
                * math.exp(-4.0 * au ** 3 / 27.0))
    if u < _MP_SWITCH:
        return _stable_p_highprec(u)

    def damp_cos(t):
        return math.exp(-t ** 1.5 * _COS_SCALE) * math.cos(t ** 1.5 * _COS_SCALE)

    def damp_sin(t):
        return math.exp(-t ** 1.5 * _COS_SCALE) * math.sin(t ** 1.5 * _COS_SCALE)

    # cos(tu + t^{3/2}/sqrt2) = cos(tu) damp_cos - sin(tu) damp_sin
    v1, e1 = quad(damp_cos, 0.0, _T_CUT, weight="cos", wvar=u,
                  limit=800, epsabs=1e-13, epsrel=1e-12)
    v2, e2 = quad(damp_sin, 0.0, _T_CUT, weight="sin", wvar=u,
                  limit=800, epsabs=1e-13, epsrel=1e-12)
    err = (e1 + e2) / math.pi
    if err > accuracy_warn:
        warnings.warn(f"stable density quadrature residual {err:.2e} above "
                      f"{accuracy_warn:.1e}", RuntimeWarning)
    return (v1 - v2) / math.pi


def mother_curve_f(x: float) -> float:
    """Limit shape of the cycle block erasure curve in the critical window."""
    pref = math.sqrt(2.0 * math.pi) * 3.0 ** (2.0 / 3.0) / 2.0
    return pref * math.exp(-4.0 * x ** 3 / 3.0) * stable_density_p(3.0 ** (2.0 / 3.0) * x)


@dataclass(frozen=True)
class CycleScalingParams:
    """Window constants of the cycle scaling law at design rate r."""

    rbar: float
    a: float          # amplitude scale rbar^(-1/6)
    b: float          # window scale rbar^(-2/3)
    eps_star: float   # rbar / 2
    s: int

    @property
    def A(self) -> float:
        return A_expurgation(self.s)


def A_expurgation(s: int) -> float:
    """Expurgation constant exp(sum_{s'=1}^{s} 1/(2 s'))."""
    return math.exp(sum(1.0 / (2.0 * sp) for sp in range(1, s + 1)))


def cycle_params(r: float, s: int = 0) -> CycleScalingParams:
    rbar = 1.0 - r
    return CycleScalingParams(rbar=rbar, a=rbar ** (-1.0 / 6.0),
                              b=rbar ** (-2.0 / 3.0), eps_star=rbar / 2.0, s=s)


def block_scaling_approx(n: int, r: float, s: int, eps: float,
                         channel: str = "exact", window_halfwidths: float = 5.0) -> float:
    """Critical-window approximation of the block erasure probability.

    Valid for eps within O(n^(-1/3)) of the threshold; outside the default
    window a warning is issued.  With channel="rand" the leading iid-channel
    correction (second derivative of the mother curve) is added.
    """
    p = cycle_params(r, s)
    x = p.b * n ** (1.0 / 3.0) * (eps - p.eps_star)
    halfwidth = window_halfwidths / p.b * n ** (-1.0 / 3.0)
    if abs(eps - p.eps_star) > halfwidth:
        warnings.warn(f"eps={eps} outside the critical window "
                      f"half-width {halfwidth:.4g}; extrapolating", RuntimeWarning)
    f = mother_curve_f(x)
    if channel == "rand":
        h = 1e-3
        fpp = (mother_curve_f(x + h) - 2.0 * f + mother_curve_f(x - h)) / (h * h)
        f = f + (p.eps_star * (1.0 - p.eps_star) / (1.0 - r) ** (4.0 / 3.0)) \
            * fpp * n ** (-1.0 / 3.0)
    return 1.0 - p.A * p.a * n ** (-1.0 / 6.0) * f


def limit_block_curve(eps: float, r: float, s: int = 0) -> float:
    """Infinite-blocklength block erasure probability below the threshold."""
    eps_star = (1.0 - r) / 2.0
    if eps < 0.0:
        raise ValueError("eps must be nonnegative")
    if eps >= eps_star:
        return 1.0
    ratio = eps / eps_star
    expurg = math.exp(sum(ratio ** sp / (2.0 * sp) for sp in range(1, s + 1)))
    return 1.0 - math.sqrt(1.0 - ratio) * expurg


def error_floor_bit(n: int, eps: float, r: float, s: int = 0) -> float:
    """Bit erasure floor below threshold, (1/2n) L_s(2 eps / rbar).

    L_s(x) = -log(1-x) - sum_{s'<=s} x^s'/s', the tail of the log series.
    Diverges as the argument approaches one (the threshold).
    """
    x = 2.0 * eps / (1.0 - r)
    if x >= 1.0:
        raise ValueError("eps at or above the threshold; the floor diverges")
    if x < 0.0:
        raise ValueError("eps must be nonnegative")
    ls = -math.log1p(-x) - sum(x ** sp / sp for sp in range(1, s + 1))
    return ls / (2.0 * n)
