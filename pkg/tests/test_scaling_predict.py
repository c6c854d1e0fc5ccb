import math

import numpy as np
import pytest
from scipy.integrate import quad

from flscaling import (ScalingForm, UnfittableError, fit_alpha_beta,
                       predict_curve, q_function, shannon_exact)


class TestQFunction:
    def test_half_at_zero(self):
        assert q_function(0.0) == 0.5

    @pytest.mark.parametrize("z", [0.5, 1.0, 2.0])
    def test_symmetry(self, z):
        assert q_function(z) + q_function(-z) == pytest.approx(1.0, abs=1e-14)

    def test_quantile_by_numerical_integration(self):
        # independent oracle: integrate the normal density directly
        for z in (0.3, 1.959964, 3.0):
            ref, _ = quad(lambda x: math.exp(-x * x / 2) / math.sqrt(2 * math.pi),
                          z, 12.0)
            assert q_function(z) == pytest.approx(ref, abs=1e-12)
        assert q_function(1.959964) == pytest.approx(0.025, abs=1e-7)


class TestPredictCurve:
    def test_half_at_shifted_threshold(self):
        form = ScalingForm(eps_star=0.4294, alpha=0.25, n=1024, beta=0.617)
        eps0 = 0.4294 - 0.617 * 1024 ** (-2 / 3)
        (_, p), = predict_curve(form, [eps0])
        assert p == pytest.approx(0.5, abs=1e-12)

    def test_scaling_collapse(self):
        # identical z = sqrt(n)(eps* - eps) gives identical probability
        for n in (1024, 4096):
            z = 1.3
            form = ScalingForm(eps_star=0.5, alpha=0.26, n=n, kind="basic")
            eps = 0.5 - z / math.sqrt(n)
            (_, p), = predict_curve(form, [eps])
            assert p == pytest.approx(float(q_function(z / 0.26)), abs=1e-14)

    def test_bit_scaling(self):
        form = ScalingForm(eps_star=0.4294, alpha=0.25, n=1024, beta=0.0,
                           nu_star=0.2)
        rows = predict_curve(form, [0.42, 0.43])
        for eps, pb, pbit in rows:
            assert pbit == pytest.approx(0.2 * pb, rel=1e-12)

    def test_strictly_decreasing_in_eps(self):
        form = ScalingForm(eps_star=0.4294, alpha=0.25, n=1024, beta=0.617)
        rows = predict_curve(form, np.linspace(0.38, 0.48, 21))
        ps = [r[1] for r in rows]
        assert all(b < a for a, b in zip(ps, ps[1:]))

    def test_beta_shift_identity(self):
        # raising beta by d equals shifting the grid by d n^{-2/3}
        n = 2048
        f1 = ScalingForm(eps_star=0.5, alpha=0.3, n=n, beta=0.4)
        f2 = ScalingForm(eps_star=0.5, alpha=0.3, n=n, beta=0.9)
        d = 0.5 * n ** (-2 / 3)
        (_, p1), = predict_curve(f1, [0.47 - d])
        (_, p2), = predict_curve(f2, [0.47])
        assert p1 == pytest.approx(p2, rel=1e-12)

    def test_refined_close_to_basic(self):
        # mean value bound: |refined - basic| <= phi_max beta n^{-2/3} sqrt(n)/alpha
        n, alpha, beta = 4096, 0.26, 0.62
        basic = ScalingForm(eps_star=0.43, alpha=alpha, n=n, kind="basic")
        refined = ScalingForm(eps_star=0.43, alpha=alpha, n=n, beta=beta)
        bound = beta * n ** (-2 / 3) * math.sqrt(n) / alpha / math.sqrt(2 * math.pi)
        for eps in np.linspace(0.40, 0.46, 13):
            (_, pb), = predict_curve(basic, [eps])
            (_, pr), = predict_curve(refined, [eps])
            assert abs(pb - pr) <= bound + 1e-12

    def test_basic_ignores_beta(self):
        form = ScalingForm(eps_star=0.5, alpha=0.3, n=512, beta=0.7, kind="basic")
        assert form.shift == 0.0


class TestShannonExact:
    def test_boundaries(self):
        rows = shannon_exact(64, 0.5, [0.0, 1.0])
        assert rows[0][1] == pytest.approx(0.0, abs=1e-12)
        assert rows[1][1] == pytest.approx(1.0, abs=1e-12)

    def test_monotone(self):
        rows = shannon_exact(128, 0.5, np.linspace(0.2, 0.8, 25))
        ps = [r[1] for r in rows]
        assert all(b >= a - 1e-12 for a, b in zip(ps, ps[1:]))

    def test_gap_shrinks_like_one_over_n(self):
        grid = np.linspace(0.3, 0.7, 81)
        gap = {}
        for n in (256, 512):
            rows = shannon_exact(n, 0.5, grid)
            gap[n] = max(abs(exact - qa) for _, exact, qa in rows)
        ratio = gap[512] / gap[256]
        assert 0.35 <= ratio <= 0.65

    def test_non_integer_checks_rejected(self):
        with pytest.raises(ValueError):
            shannon_exact(101, 0.5, [0.3])


class TestFit:
    def _synth(self, alpha, beta, n, eps_star=0.4294, noise=0.0, seed=0):
        rng = np.random.default_rng(seed)
        eps = np.linspace(eps_star - 3 * alpha / math.sqrt(n),
                          eps_star + 3 * alpha / math.sqrt(n), 11)
        p = np.array([q_function(math.sqrt(n) * (eps_star - beta * n ** (-2 / 3) - e)
                                 / alpha) for e in eps])
        se = np.full_like(p, 0.01)
        if noise:
            p = np.clip(p + rng.normal(0.0, noise, size=p.shape), 1e-4, 1 - 1e-4)
        return eps, p, se

    def test_zero_noise_round_trip(self):
        eps, p, se = self._synth(0.25, 0.62, 2048)
        res = fit_alpha_beta(eps, p, se, 0.4294, 2048)
        assert res.alpha == pytest.approx(0.25, abs=1e-6)
        assert res.beta == pytest.approx(0.62, abs=1e-6)

    def test_noisy_recovery(self):
        eps, p, se = self._synth(0.25, 0.62, 2048, noise=0.01, seed=5)
        res = fit_alpha_beta(eps, p, se, 0.4294, 2048)
        assert abs(res.alpha - 0.25) / 0.25 <= 0.05
        assert abs(res.beta - 0.62) / 0.62 <= 0.25

    def test_beta_frozen(self):
        eps, p, se = self._synth(0.25, 0.0, 2048)
        res = fit_alpha_beta(eps, p, se, 0.4294, 2048, beta_fixed=0.0)
        assert res.beta == 0.0
        assert abs(res.alpha - 0.25) / 0.25 <= 0.02

    def test_degenerate_curve_rejected(self):
        eps = np.linspace(0.3, 0.4, 8)
        with pytest.raises(UnfittableError):
            fit_alpha_beta(eps, np.ones_like(eps), np.full_like(eps, 0.01),
                           0.4294, 1024)

    def test_too_few_points_rejected(self):
        with pytest.raises(UnfittableError):
            fit_alpha_beta([0.4, 0.41, 0.42], [0.2, 0.5, 0.8],
                           [0.01, 0.01, 0.01], 0.4294, 1024)
