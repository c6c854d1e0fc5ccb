import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flscaling import (EnsembleSpec, MarginallyStableError, asymptotic_bit_curve,
                       critical_data, profile_at, threshold, validate_and_normalize)
from flscaling.density_evolution import dsigma_deps_at

from conftest import poisson_spec, regular_spec

# high-precision tangency roots of the threshold system (30 digits)
EXACT_THRESHOLDS = {
    (3, 4): 0.6474256494010104,
    (3, 5): 0.5175701819014951,
    (3, 6): 0.4294398144194918,
    (4, 5): 0.6001109521273414,
    (4, 6): 0.5061323462551761,
    (5, 6): 0.5510035344287347,
    (6, 7): 0.5078931849550074,
    (6, 12): 0.3074622615147489,
}


class TestProfile:
    def test_start_of_decoding_sigma(self, d36):
        # at x_l = 1 the degree-one check fraction equals l e (1-e)^(r-1)
        for eps in (0.2, 0.42944, 0.6):
            p = profile_at(d36, eps, 1.0)
            assert p.sigma == pytest.approx(3 * eps * (1 - eps) ** 5, rel=1e-12)

    def test_zero_erasure(self, d36):
        p = profile_at(d36, 0.0, 0.7)
        assert p.sigma == p.tau == p.nu == 0.0

    def test_sigma_touches_zero_at_critical(self, d36):
        cd = critical_data(d36)
        p = profile_at(d36, 0.42944, cd.x_star)
        assert abs(p.sigma) <= 1e-5  # threshold quoted to 5 digits only

    def test_edge_balance_regular(self, d36):
        # sigma + sum_i i tau_i = nu l along the whole trajectory
        for eps in (0.2, 0.4294, 0.7):
            for xl in (0.1, 0.35, 0.8, 1.0):
                p = profile_at(d36, eps, xl)
                itau = sum(i * t for i, t in p.R.items())
                assert p.sigma + itau == pytest.approx(3 * p.nu, abs=1e-10)

    def test_edge_balance_poisson(self, poisson3):
        for eps in (0.3, 0.8):
            for xl in (0.2, 0.9):
                p = profile_at(poisson3, eps, xl)
                itau = sum(i * t for i, t in p.R.items())
                assert p.sigma + itau == pytest.approx(3 * p.nu, abs=1e-9)

    def test_nu_is_node_poly(self, d36):
        p = profile_at(d36, 0.37, 0.6)
        assert p.nu == pytest.approx(0.37 * 0.6 ** 3, rel=1e-12)

    @given(st.floats(0.05, 0.95), st.floats(0.05, 1.0))
    @settings(max_examples=40, deadline=None)
    def test_edge_balance_property_irregular(self, eps, xl):
        # right-side residual edges match the left-side residual edges
        spec = EnsembleSpec(kind="standard",
                            lam=validate_and_normalize({2: 1 / 6, 4: 5 / 6}),
                            rho=validate_and_normalize({6: 1.0}), n=1225)
        p = profile_at(spec, eps, xl)
        itau = sum(i * t for i, t in p.R.items())
        left_edges = sum(i * li for i, li in p.L.items())
        assert p.sigma + itau == pytest.approx(left_edges, abs=1e-10)


class TestThreshold:
    @pytest.mark.parametrize("lr", sorted(EXACT_THRESHOLDS))
    def test_regular_thresholds(self, lr):
        l, r = lr
        assert threshold(regular_spec(l, r)) == pytest.approx(
            EXACT_THRESHOLDS[lr], abs=2e-7)

    def test_poisson_l3(self, poisson3):
        assert threshold(poisson3) == pytest.approx(0.818469, abs=1e-5)

    def test_cycle_poisson_exact(self):
        for rate in (0.0, 0.25, 0.5):
            spec = poisson_spec(2, rate)
            assert threshold(spec) == pytest.approx((1 - rate) / 2, abs=2e-7)

    def test_irregular_fig3(self):
        spec = EnsembleSpec(kind="standard",
                            lam=validate_and_normalize({2: 1 / 6, 4: 5 / 6}),
                            rho=validate_and_normalize({6: 1.0}), n=1225)
        assert threshold(spec) == pytest.approx(0.48281, abs=1e-4)

    def test_monotone_in_left_mass(self):
        # moving left-degree mass downward never raises the threshold
        pairs = [
            ({4: 1.0}, {2: 0.2, 4: 0.8}),
            ({3: 1.0}, {2: 0.3, 3: 0.7}),
            ({2: 1 / 6, 4: 5 / 6}, {2: 0.5, 4: 0.5}),
        ]
        for hi, lo in pairs:
            e_hi = threshold(EnsembleSpec(kind="standard",
                                          lam=validate_and_normalize(hi),
                                          rho=validate_and_normalize({6: 1.0}), n=600))
            e_lo = threshold(EnsembleSpec(kind="standard",
                                          lam=validate_and_normalize(lo),
                                          rho=validate_and_normalize({6: 1.0}), n=600))
            assert e_lo <= e_hi + 1e-6

    def test_poisson_rate_relation(self):
        # eps*(l, r') = eps*(l, r) (1-r')/(1-r)
        base = threshold(poisson_spec(3, 0.0))
        for rate in (0.25, 0.5):
            est = threshold(poisson_spec(3, rate))
            assert est == pytest.approx(base * (1 - rate), abs=1e-7)

    def test_gap_sign_structure(self, d36):
        from flscaling.density_evolution import _min_gap
        estar = threshold(d36)
        assert _min_gap(d36, estar - 1e-3)[0] > 0
        assert _min_gap(d36, estar + 1e-3)[0] < 0


class TestCriticalData:
    def test_nu_star_36(self, d36):
        cd = critical_data(d36)
        assert cd.nu_star == pytest.approx(0.203, abs=1e-3)

    def test_dsigma_deps_closed_form(self, d36):
        cd = critical_data(d36)
        expected = -3 * cd.eps_star * cd.x_star ** 4 * 5 * (
            1 - cd.eps_star * cd.x_star ** 2) ** 4
        assert cd.dsigma_deps == pytest.approx(expected, rel=1e-12)

    def test_dsigma_deps_finite_difference(self, d36):
        # independent oracle: central difference of sigma(x*; eps) in eps
        cd = critical_data(d36)
        h = 1e-6
        up = profile_at(d36, cd.eps_star + h, cd.x_star).sigma
        dn = profile_at(d36, cd.eps_star - h, cd.x_star).sigma
        assert (up - dn) / (2 * h) == pytest.approx(cd.dsigma_deps, rel=1e-6)

    def test_poisson_root_residual(self, poisson3):
        cd = critical_data(poisson3)
        resid = float(poisson3.rho_fn_m1(cd.eps_star * poisson3.lam(cd.x_star))) + cd.x_star
        assert abs(resid) <= 1e-6

    def test_marginally_stable_rejected(self, cycle_half):
        with pytest.raises(MarginallyStableError):
            critical_data(cycle_half)


class TestBitCurve:
    def test_cycle_limit_at_origin(self, cycle_half):
        (eps, pb), = asymptotic_bit_curve(cycle_half, [1e-8])
        assert eps == pytest.approx(0.25, abs=1e-6)
        assert pb == pytest.approx(0.0, abs=1e-6)

    def test_endpoint_finite(self, d36):
        (eps, pb), = asymptotic_bit_curve(d36, [1.0])
        assert eps == pytest.approx(1.0)
        assert 0.0 < pb <= 1.0

    def test_monotone_in_eps(self, d36):
        pts = asymptotic_bit_curve(d36, np.linspace(0.85, 1.0, 30))
        eps = [p[0] for p in pts]
        pb = [p[1] for p in pts]
        assert all(np.diff(eps) > 0)
        assert all(np.diff(pb) > 0)

    def test_below_branch_rejected(self, d36):
        with pytest.raises(ValueError):
            asymptotic_bit_curve(d36, [0.05])

    @pytest.mark.slow
    def test_bit_curve_vs_monte_carlo(self, d36):
        # resample the parametric curve and compare with peeling estimates
        from flscaling.peeling_sim import mc_curve
        spec = regular_spec(3, 6, n=16384)
        estar = threshold(spec)
        x_fp = critical_data(spec).eps_star * float(spec.lam(critical_data(spec).x_star))
        for target in (estar + 0.03, estar + 0.06):
            # invert eps(x) = target by bisection on the parametric branch
            lo, hi = x_fp + 1e-4, 1.0
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                (e, _), = asymptotic_bit_curve(spec, [mid])
                if e < target:
                    lo = mid
                else:
                    hi = mid
            (e, pb), = asymptotic_bit_curve(spec, [0.5 * (lo + hi)])
            curve = mc_curve(spec, [target], trials=300, seed=42, channel="exact")
            row = curve.rows[0]
            assert abs(row.p_bit - pb) <= 3 * row.p_bit_se + 2.0 / spec.n
