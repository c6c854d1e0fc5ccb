"""Mean and covariance dynamics of peeling decoding for regular ensembles.

The decoder state is the triple (nu, sigma, tau) of residual variable,
degree-one check and degree>=2 check fractions.  One variable is removed
per step, so nu is the clock and the mean/covariance system is integrated
in nu from the start of decoding down to the critical residual size.  The
waterfall variance parameter alpha and the finite-length shift beta are
read off at the critical point.

Everything here assumes a regular left degree; the standard case also
requires a regular right degree.  The channel is the fixed-erasure-count
one: the initial residual size is deterministic, so all covariances
involving nu vanish and the covariance block is 2x2 in (sigma, tau).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .density_evolution import critical_data, dsigma_deps_at, profile_at
from .ensembles import EnsembleSpec

__all__ = [
    "RateCoefficients",
    "EvolutionState",
    "Trajectory",
    "ScalingParams",
    "StateInfeasibleError",
    "NumericalInconsistencyError",
    "rate_coefficients",
    "initial_moments",
    "integrate_to_critical",
    "alpha",
    "beta",
    "omega_constant",
    "scaling_params",
    "poisson_rescale",
]

OMEGA_DOCUMENTED = 1.00
ODE_RTOL = 1e-9
ODE_ATOL = 1e-13
ROOT_TOL = 1e-10


class StateInfeasibleError(ValueError):
    """(nu, sigma, tau) does not correspond to a realizable degree profile."""


class NumericalInconsistencyError(RuntimeError):
    """A quantity that must be positive came out nonpositive."""


def _require_regular(spec: EnsembleSpec) -> tuple[int, int | None]:
    if not spec.lam.is_regular():
        raise ValueError("covariance evolution is implemented for regular left degrees only")
    l = spec.lam.regular_degree()
    if spec.kind == "standard":
        if not spec.rho.is_regular():
            raise ValueError("standard covariance evolution requires a regular right degree")
        return l, spec.rho.regular_degree()
    return l, None


class _Generator:
    """Generator polynomial p(z) of residual degree>=2 checks plus helpers.

    a(z) = z p'(z)/p(z) is the mean residual degree of those checks; it is
    increasing on z > 0, which is asserted numerically on construction.
    """

    def __init__(self, spec: EnsembleSpec):
        self.kind = spec.kind
        if spec.kind == "standard":
            self.r = spec.rho.regular_degree()
            self.p2 = math.comb(self.r, 2)
            self.a_sup = float(self.r)
            # p(z) = sum_{i=2}^{r} C(r, i) z^i, evaluated from coefficients
            # so small z does not cancel
            self._pc = np.array([math.comb(self.r, i) for i in range(2, self.r + 1)],
                                dtype=float)
            self._pe = np.arange(2, self.r + 1, dtype=float)
        else:
            self.r = None
            self.p2 = 0.5
            self.a_sup = math.inf
        zs = np.geomspace(1e-8, 50.0 if self.kind == "poisson" else 1e4, 400)
        a = self.a(zs)
        if not np.all(np.diff(a) > 0):
            raise NumericalInconsistencyError("a(z) is not increasing on the probe grid")

    def p(self, z):
        if self.kind == "standard":
            z = np.asarray(z, dtype=float)
            return (self._pc * z[..., None] ** self._pe).sum(axis=-1)
        z = np.asarray(z, dtype=float)
        # series below 1e-3: expm1(z) - z loses relative precision there
        series = z * z / 2.0 * (1.0 + z / 3.0 * (1.0 + z / 4.0 * (1.0 + z / 5.0 * (1.0 + z / 6.0))))
        with np.errstate(over="ignore", invalid="ignore"):
            direct = np.expm1(z) - z
        return np.where(z < 1e-3, series, direct)

    def p_prime(self, z):
        if self.kind == "standard":
            z = np.asarray(z, dtype=float)
            return (self._pc * self._pe * z[..., None] ** (self._pe - 1.0)).sum(axis=-1)
        return np.expm1(z)

    def p_pp(self, z):
        if self.kind == "standard":
            z = np.asarray(z, dtype=float)
            return (self._pc * self._pe * (self._pe - 1.0)
                    * z[..., None] ** (self._pe - 2.0)).sum(axis=-1)
        return np.exp(z)

    def a(self, z):
        return z * self.p_prime(z) / self.p(z)

    def a_prime(self, z):
        p, pp, ppp = self.p(z), self.p_prime(z), self.p_pp(z)
        return (pp + z * ppp) / p - z * (pp / p) ** 2

    def solve_z(self, target: float) -> float:
        """Invert a(z) = target by Newton with a bisection fallback."""
        if not (2.0 < target < self.a_sup):
            raise StateInfeasibleError(
                f"mean residual check degree {target:.6g} outside (2, {self.a_sup})")
        z = 1.0
        for _ in range(60):
            f = self.a(z) - target
            df = self.a_prime(z)
            step = f / df
            z_new = z - step
            if z_new <= 0.0:
                break
            if abs(step) < ROOT_TOL * max(1.0, abs(z)):
                return z_new
            z = z_new
        lo, hi = 1e-12, 1.0
        hi_cap = 690.0 if self.kind == "poisson" else 1e12  # exp overflow guard
        while self.a(hi) < target:
            hi *= 2.0
            if hi > hi_cap:
                raise StateInfeasibleError("failed to bracket the generator argument")
        return brentq(lambda zz: self.a(zz) - target, lo, hi, xtol=1e-14, rtol=8.9e-16)


@lru_cache(maxsize=None)
def _generator_cached(key) -> _Generator:
    kind, r = key
    from .ensembles import validate_and_normalize
    if kind == "standard":
        spec = EnsembleSpec(kind="standard", lam=validate_and_normalize({2: 1.0}),
                            rho=validate_and_normalize({r: 1.0}), n=2)
        return _Generator(spec)
    spec = EnsembleSpec(kind="poisson", lam=validate_and_normalize({2: 1.0}),
                        rate=0.0, n=2)
    return _Generator(spec)


def _generator(spec: EnsembleSpec) -> _Generator:
    if spec.kind == "standard":
        return _generator_cached(("standard", spec.rho.regular_degree()))
    return _generator_cached(("poisson", 0))  # p(z) does not depend on the rate


@dataclass(frozen=True)
class RateCoefficients:
    """Per-step drift, diffusion and state partials of (sigma, tau)."""

    z_gen: float
    tau2: float
    f_sigma: float
    f_tau: float
    f_ss: float
    f_st: float
    f_tt: float
    df_sigma_dnu: float
    df_sigma_dsigma: float
    df_sigma_dtau: float
    df_tau_dnu: float
    df_tau_dsigma: float
    df_tau_dtau: float


def rate_coefficients(spec: EnsembleSpec, nu: float, sigma: float, tau: float) -> RateCoefficients:
    """Evaluate the step statistics at state (nu, sigma, tau).

    The degree profile of the degree>=2 checks is the dominating type of
    the generator polynomial, pinned by a(z) = (nu l - sigma)/tau.  The
    peeled variable is size-biased by its number of degree-one neighbors;
    its numbers of degree-one and degree-two neighbors drive the drift and
    diffusion of (sigma, tau).
    """
    l, _ = _require_regular(spec)
    if nu <= 0.0 or tau <= 0.0:
        raise StateInfeasibleError("nu and tau must be positive")
    gen = _generator(spec)
    z = gen.solve_z((nu * l - sigma) / tau)
    p = float(gen.p(z))
    tau2 = gen.p2 * z * z / p * tau
    q1 = sigma / (nu * l)
    f_tau = -(l - 1) * 2.0 * tau2 / (nu * l)
    f_sigma = -1.0 - (l - 1) * q1 - f_tau
    f_tt = -f_tau * (1.0 + f_tau / (l - 1))
    f_st = f_tau * (1.0 - (f_sigma + 1.0) / (l - 1))
    f_ss = (-f_tau ** 2 / (l - 1)
            - (l - 1) * (q1 - 1.0) * q1
            - f_tau * (1.0 + 2.0 * q1))
    az = float(gen.a(z))
    apz = float(gen.a_prime(z))
    common = gen.p2 * z * (2.0 - az) / (apz * p)
    df_tau_dsigma = 2.0 * (l - 1) / (nu * l) * common
    df_tau_dnu = -2.0 * (l - 1) / (nu * l) * (-tau2 / nu + common * l)
    df_tau_dtau = -2.0 * (l - 1) / (nu * l) * (tau2 / tau - common * az)
    df_sigma_dnu = (l - 1) * sigma / (nu * nu * l) - df_tau_dnu
    df_sigma_dtau = -df_tau_dtau
    df_sigma_dsigma = -(l - 1) / (nu * l) - df_tau_dsigma
    return RateCoefficients(
        z_gen=z, tau2=tau2, f_sigma=f_sigma, f_tau=f_tau,
        f_ss=f_ss, f_st=f_st, f_tt=f_tt,
        df_sigma_dnu=df_sigma_dnu, df_sigma_dsigma=df_sigma_dsigma,
        df_sigma_dtau=df_sigma_dtau,
        df_tau_dnu=df_tau_dnu, df_tau_dsigma=df_tau_dsigma, df_tau_dtau=df_tau_dtau)


@dataclass(frozen=True)
class EvolutionState:
    """Means (nu, sigma, tau) and the 3x3 covariance block at one instant."""

    nu: float
    sigma: float
    tau: float
    delta: np.ndarray  # order (nu, sigma, tau); nu rows/cols are zero
    tau_clock: float

    @property
    def z(self) -> tuple[float, float, float]:
        return (self.nu, self.sigma, self.tau)

    @property
    def delta_ss(self) -> float:
        return float(self.delta[1, 1])


def _pack_delta(dss: float, dst: float, dtt: float) -> np.ndarray:
    d = np.zeros((3, 3))
    d[1, 1] = dss
    d[1, 2] = d[2, 1] = dst
    d[2, 2] = dtt
    return d


def initial_moments(spec: EnsembleSpec, eps: float) -> EvolutionState:
    """State statistics right after reception, with exactly n*eps erasures.

    Means and covariances are the large-n limits per variable node.  The
    poisson formulas hold for any design rate: with mu the mean residual
    check degree, every per-check moment is a function of mu alone and the
    per-variable normalization contributes one factor of (1 - rate).
    """
    l, r = _require_regular(spec)
    if spec.kind == "standard":
        eb = 1.0 - eps
        Es = l * eps * eb ** (r - 1)
        Et = l / r * (1.0 - eb ** r - r * eps * eb ** (r - 1))
        dss = l * eps * eb ** (r - 1) * (
            1.0 - eb ** (r - 2) * (1.0 + eps * ((r - 1) * eps - 1.0) * r))
        dst = -l * eps * eb ** (r - 1) * (
            1.0 - eb ** (r - 2) * (1.0 + eps * ((r - 1) ** 2 * eps - 1.0)))
        dtt = (l * eb ** (r - 1) / r) * (
            1.0 + (r - 1) * eps - eb ** (r - 2) *
            (1.0 + eps * (2 * r - 3 + (r - 3) * (r - 1) * eps + (r - 1) ** 3 * eps ** 2)))
    else:
        rb = spec.rbar
        mu = l * eps / rb
        em = math.exp(-mu)
        em2 = em * em
        Es = rb * mu * em
        Et = rb * (1.0 - em - mu * em)
        dss = rb * (mu * em - mu * (1.0 - mu + mu ** 2) * em2)
        dst = rb * (-mu * em + mu * (1.0 + mu ** 2) * em2)
        dtt = rb * ((1.0 + mu) * em - (1.0 + 2 * mu + mu ** 2 + mu ** 3) * em2)
    return EvolutionState(nu=eps, sigma=Es, tau=Et,
                          delta=_pack_delta(dss, dst, dtt), tau_clock=0.0)


@dataclass
class Trajectory:
    """Integrated mean/covariance path from nu = eps down to nu = nu_stop."""

    spec: EnsembleSpec
    eps: float
    nu_stop: float
    states: list[EvolutionState]
    died: bool  # sigma mean went materially negative before nu_stop
    _dense: object = None

    def final(self) -> EvolutionState:
        return self.states[-1]

    def at(self, nu: float) -> EvolutionState:
        y = self._dense(nu)
        return EvolutionState(nu=float(nu), sigma=float(y[0]), tau=float(y[1]),
                              delta=_pack_delta(float(y[2]), float(y[3]), float(y[4])),
                              tau_clock=float(self.eps - nu))


def _critical_nu(spec: EnsembleSpec) -> float:
    return critical_data(spec).nu_star


def integrate_to_critical(spec: EnsembleSpec, eps: float, nu_stop: float | None = None,
                          checkpoints=None, rtol: float = ODE_RTOL,
                          n_ref: int | None = None) -> Trajectory:
    """Integrate means and covariances from nu = eps down to the critical nu.

    nu is the time variable (one variable peeled per step).  The stop point
    defaults to the critical residual size of the threshold trajectory.
    When the sigma mean drops below -10 sqrt(delta_ss / n_ref) the
    trajectory is flagged as died; the coefficients continue analytically
    so integration still completes.
    """
    _require_regular(spec)
    if nu_stop is None:
        nu_stop = _critical_nu(spec)
    if not nu_stop < eps:
        raise ValueError("stop point must lie below the initial residual size")
    start = initial_moments(spec, eps)
    y0 = [start.sigma, start.tau,
          start.delta[1, 1], start.delta[1, 2], start.delta[2, 2]]
    n_ref = n_ref if n_ref is not None else spec.n

    def rhs(nu, y):
        s, t, dss, dst, dtt = y
        c = rate_coefficients(spec, nu, s, t)
        # d/dnu = -d/dtau_clock since nu falls at unit rate
        gss = c.f_ss + 2.0 * (dss * c.df_sigma_dsigma + dst * c.df_sigma_dtau)
        gst = (c.f_st + dss * c.df_tau_dsigma + dst * c.df_tau_dtau
               + c.df_sigma_dsigma * dst + c.df_sigma_dtau * dtt)
        gtt = c.f_tt + 2.0 * (dst * c.df_tau_dsigma + dtt * c.df_tau_dtau)
        return [-c.f_sigma, -c.f_tau, -gss, -gst, -gtt]

    sol = solve_ivp(rhs, (eps, nu_stop), y0, method="DOP853",
                    rtol=rtol, atol=ODE_ATOL, dense_output=True)
    if not sol.success:
        raise NumericalInconsistencyError(f"covariance integration failed: {sol.message}")

    died = False
    nus = checkpoints if checkpoints is not None else np.linspace(eps, nu_stop, 65)
    states = []
    for nu in nus:
        s, t, dss, dst, dtt = sol.sol(nu)
        if s < -10.0 * math.sqrt(max(dss, 0.0) / n_ref):
            died = True
        states.append(EvolutionState(nu=float(nu), sigma=float(s), tau=float(t),
                                     delta=_pack_delta(float(dss), float(dst), float(dtt)),
                                     tau_clock=float(eps - nu)))
    traj = Trajectory(spec=spec, eps=eps, nu_stop=float(nu_stop), states=states,
                      died=died, _dense=sol.sol)
    if died:
        warnings.warn("sigma mean crossed materially below zero before the stop point; "
                      "coefficients were continued analytically", RuntimeWarning)
    return traj


def alpha(spec: EnsembleSpec, rtol: float = ODE_RTOL) -> tuple[float, float]:
    """Variance parameters (fixed-count channel, iid channel) at the threshold."""
    cd = critical_data(spec)
    traj = integrate_to_critical(spec, cd.eps_star, nu_stop=cd.nu_star, rtol=rtol)
    dss = traj.final().delta_ss
    if dss <= 0.0:
        raise NumericalInconsistencyError("covariance of sigma is nonpositive at the critical point")
    a_exact = math.sqrt(dss) / abs(cd.dsigma_deps)
    a_rand = math.sqrt(a_exact ** 2 + cd.eps_star * (1.0 - cd.eps_star))
    return a_exact, a_rand


def _beta_closed_form_standard(spec: EnsembleSpec, cd, tau_star: float) -> float:
    """Shift parameter through the explicit residual-degree functions.

    g(x) is the mean residual degree of degree>=2 checks when each socket
    survives with probability x; h(x) is (l-1) times the fraction of edges
    into degree-two checks among edges into degree>=2 checks.
    """
    l, r = _require_regular(spec)
    xr = cd.eps_star * float(spec.lam(cd.x_star))

    def m_(x):
        return sum(math.comb(r, i) * x ** i * (1 - x) ** (r - i) for i in range(2, r + 1))

    def M_(x):
        return sum(i * math.comb(r, i) * x ** i * (1 - x) ** (r - i) for i in range(2, r + 1))

    def g(x):
        return M_(x) / m_(x)

    def h(x):
        return (l - 1) * 2.0 * math.comb(r, 2) * x ** 2 * (1 - x) ** (r - 2) / M_(x)

    h_ = 1e-6
    gp = (g(xr + h_) - g(xr - h_)) / (2 * h_)
    hp = (h(xr + h_) - h(xr - h_)) / (2 * h_)
    bracket = (hp * g(xr) - l * hp) / (tau_star * gp)
    if bracket <= 0.0:
        raise NumericalInconsistencyError("closed-form shift bracket is nonpositive")
    return ((l - 2) / (l - 1)) ** (2.0 / 3.0) * bracket ** (-1.0 / 3.0) / abs(cd.dsigma_deps)


def beta(spec: EnsembleSpec, omega: float = OMEGA_DOCUMENTED) -> float:
    """Finite-length threshold shift parameter (times omega).

    Evaluated from the drift/diffusion coefficients at the critical point;
    for standard ensembles the closed form through g and h is computed as
    well and both are required to agree to 1e-6.
    """
    cd = critical_data(spec)
    prof = profile_at(spec, cd.eps_star, cd.x_star)
    c = rate_coefficients(spec, cd.nu_star, 0.0, prof.tau)
    bracket = -c.df_sigma_dnu + c.df_sigma_dtau * c.f_tau
    if bracket <= 0.0:
        raise NumericalInconsistencyError("shift bracket is nonpositive")
    b = -(c.f_ss ** (2.0 / 3.0)) * bracket ** (-1.0 / 3.0) / cd.dsigma_deps
    if spec.kind == "standard":
        b_closed = _beta_closed_form_standard(spec, cd, prof.tau)
        if abs(b - b_closed) > 1e-6:
            raise NumericalInconsistencyError(
                f"shift parameter forms disagree: {b!r} vs {b_closed!r}")
    if b <= 0.0:
        raise NumericalInconsistencyError("shift parameter is nonpositive")
    return omega * b


def omega_constant(mode: str = "documented") -> float:
    """Universal constant in the shift parameter.

    "documented" returns the accepted numerical value 1.00.  The quadrature
    mode (Airy-function evaluation of the Brownian-minimum distribution) is
    not built; requesting it raises NotImplementedError.
    """
    if mode == "documented":
        return OMEGA_DOCUMENTED
    if mode == "quadrature":
        raise NotImplementedError("Airy quadrature for omega is not implemented; "
                                  "use mode='documented'")
    raise ValueError(f"unknown omega mode {mode!r}")


@dataclass(frozen=True)
class ScalingParams:
    """Everything the finite-length laws need about one ensemble."""

    eps_star: float
    x_star: float
    nu_star: float
    dsigma_deps: float
    delta_ss_critical: float
    alpha_exact: float
    alpha_rand: float
    beta: float
    omega: float

    def as_dict(self) -> dict:
        return {
            "eps_star": self.eps_star, "x_star": self.x_star, "nu_star": self.nu_star,
            "dsigma_deps": self.dsigma_deps, "delta_ss_critical": self.delta_ss_critical,
            "alpha_exact": self.alpha_exact, "alpha_rand": self.alpha_rand,
            "beta": self.beta, "omega": self.omega,
        }


def scaling_params(spec: EnsembleSpec, omega: float = OMEGA_DOCUMENTED) -> ScalingParams:
    """Compute all scaling parameters of a regular spec at its threshold."""
    cd = critical_data(spec)
    traj = integrate_to_critical(spec, cd.eps_star, nu_stop=cd.nu_star)
    dss = traj.final().delta_ss
    a_exact = math.sqrt(dss) / abs(cd.dsigma_deps)
    a_rand = math.sqrt(a_exact ** 2 + cd.eps_star * (1.0 - cd.eps_star))
    b = beta(spec, omega=omega)
    return ScalingParams(eps_star=cd.eps_star, x_star=cd.x_star, nu_star=cd.nu_star,
                         dsigma_deps=cd.dsigma_deps, delta_ss_critical=dss,
                         alpha_exact=a_exact, alpha_rand=a_rand, beta=b, omega=omega)


def poisson_rescale(params: ScalingParams, r_from: float, r_to: float) -> ScalingParams:
    """Carry poisson scaling parameters from design rate r_from to r_to.

    Threshold and residual size scale linearly in (1 - rate), alpha with
    the square root and beta with the cube root; the sensitivity is rate
    invariant.
    """
    if not r_to < 1.0:
        raise ValueError("target design rate must be below 1")
    c = (1.0 - r_to) / (1.0 - r_from)
    return ScalingParams(
        eps_star=params.eps_star * c,
        x_star=params.x_star,
        nu_star=params.nu_star * c,
        dsigma_deps=params.dsigma_deps,
        delta_ss_critical=params.delta_ss_critical * c,
        alpha_exact=params.alpha_exact * math.sqrt(c),
        alpha_rand=math.sqrt(params.alpha_exact ** 2 * c
                             + params.eps_star * c * (1.0 - params.eps_star * c)),
        beta=params.beta * c ** (1.0 / 3.0),
        omega=params.omega)
