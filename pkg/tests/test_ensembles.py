import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flscaling import (EnsembleSpec, min_stopping_set_leq, sample_graph,
                       sample_graph_expurgated, validate_and_normalize)
from flscaling.ensembles import ExpurgationBudgetError, TannerGraph

from conftest import poisson_spec, regular_spec


class TestValidateAndNormalize:
    def test_single_term(self):
        dd = validate_and_normalize({3: 1.0})
        assert dd.coeffs == ((3, 1.0),)
        assert dd(0.5) == pytest.approx(0.25)  # x^2

    def test_irregular_values(self):
        dd = validate_and_normalize({2: 1 / 6, 4: 5 / 6})
        assert dd.coeff(2) == pytest.approx(1 / 6)
        assert dd.coeff(4) == pytest.approx(5 / 6)

    def test_scale_invariance(self):
        dd = validate_and_normalize({2: 2.0, 4: 2.0})
        assert dd.coeff(2) == pytest.approx(0.5)
        assert dd.coeff(4) == pytest.approx(0.5)

    def test_negative_rejected(self):
        with pytest.raises(ValueError, match="degree 4"):
            validate_and_normalize({2: 0.5, 4: -0.1})

    def test_all_zero_rejected(self):
        with pytest.raises(ValueError):
            validate_and_normalize({2: 0.0})

    @given(st.dictionaries(st.integers(1, 30), st.floats(0.01, 100.0),
                           min_size=1, max_size=6))
    @settings(max_examples=50, deadline=None)
    def test_normalization_sums_to_one(self, raw):
        dd = validate_and_normalize(raw)
        assert abs(sum(c for _, c in dd.coeffs) - 1.0) <= 1e-12
        assert list(dd.degrees) == sorted(dd.degrees)


class TestDesignRate:
    def test_regular_36(self):
        assert regular_spec(3, 6).design_rate() == pytest.approx(0.5)

    def test_poisson_stored(self):
        assert poisson_spec(2, 0.5).design_rate() == 0.5

    def test_equal_integrals(self):
        spec = EnsembleSpec(kind="standard", lam=validate_and_normalize({4: 1.0}),
                            rho=validate_and_normalize({4: 1.0}), n=8)
        assert spec.design_rate() == pytest.approx(0.0)


class TestSampling:
    def test_poisson_shape(self):
        spec = poisson_spec(2, 0.5, n=4)
        g = sample_graph(spec, 0)
        assert g.n == 4 and g.m == 2 and g.num_edges == 8

    def test_standard_socket_counts(self):
        spec = regular_spec(3, 6, n=6)
        g = sample_graph(spec, 0)
        assert g.num_edges == 18
        assert g.m == 3
        assert np.all(g.check_degrees() == 6)

    def test_socket_conservation(self):
        for seed in range(5):
            spec = EnsembleSpec(kind="standard",
                                lam=validate_and_normalize({2: 1 / 6, 4: 5 / 6}),
                                rho=validate_and_normalize({6: 1.0}), n=1225)
            g = sample_graph(spec, seed)
            assert int(g.check_degrees().sum()) == g.num_edges == int(g.var_ptr[-1])

    @pytest.mark.slow
    def test_sampling_uniformity_tiny(self):
        # 3 degree-2 variables on 2 degree-3 checks: compare the empirical
        # distribution over the 6! socket matchings with uniform via
        # a chi-square statistic (4 standard errors of its own mean).
        spec = EnsembleSpec(kind="standard", lam=validate_and_normalize({2: 1.0}),
                            rho=validate_and_normalize({3: 1.0}), n=3)
        rng = np.random.default_rng(1234)
        samples = 120000
        counts = {}
        for _ in range(samples):
            g = sample_graph(spec, rng)
            key = tuple(int(c) for c in g.var_adj)
            counts[key] = counts.get(key, 0) + 1
        ncells = 2 ** 6  # each of 6 sockets picks one of two checks, balanced
        # enumerate realizable configurations: all 3-per-check assignments
        from itertools import product
        cells = [k for k in product((0, 1), repeat=6) if sum(k) == 3]
        assert set(counts) <= set(cells)
        k = len(cells)
        expected = samples / k
        chi2 = sum((counts.get(c, 0) - expected) ** 2 / expected for c in cells)
        dof = k - 1
        assert abs(chi2 - dof) <= 4.0 * math.sqrt(2.0 * dof)

    def test_poisson_check_degree_histogram(self):
        # empirical check degrees against the poisson limit profile; the
        # multinomial edge-count constraint only shrinks per-cell variance,
        # so the iid standard error is conservative
        spec = poisson_spec(3, 0.0, n=10000)
        g = sample_graph(spec, 99)
        degs = g.check_degrees()
        mu = 3.0
        obs = np.bincount(degs, minlength=10)
        for k in range(9):
            pk = math.exp(-mu) * mu ** k / math.factorial(k)
            se = math.sqrt(pk * (1.0 - pk) / g.m)
            assert abs(obs[k] / g.m - pk) <= 4.0 * se


def _graph_from_pairs(pairs, m):
    n = len(pairs)
    var_ptr = np.arange(0, 2 * n + 1, 2, dtype=np.int64)
    var_adj = np.array([c for p in pairs for c in p], dtype=np.int64)
    return TannerGraph(n=n, m=m, var_ptr=var_ptr, var_adj=var_adj)


class TestStoppingSets:
    def test_shared_check_pair(self):
        g = _graph_from_pairs([(0, 1), (0, 1)], 2)
        assert min_stopping_set_leq(g, 2)

    def test_tree_has_none(self):
        g = _graph_from_pairs([(0, 1), (1, 2), (2, 3)], 4)
        for s in range(1, 4):
            assert not min_stopping_set_leq(g, s)

    def test_triangle(self):
        g = _graph_from_pairs([(0, 1), (1, 2), (2, 0)], 3)
        assert not min_stopping_set_leq(g, 2)
        assert min_stopping_set_leq(g, 3)

    def test_self_loop_is_size_one(self):
        g = _graph_from_pairs([(0, 0), (1, 2)], 3)
        assert min_stopping_set_leq(g, 1)

    def test_exhaustive_matches_specialization(self):
        rng = np.random.default_rng(5)
        spec = poisson_spec(2, 0.5, n=10)
        for seed in range(20):
            g = sample_graph(spec, rng)
            # generic exhaustive path (force it by a non-cycle-looking copy)
            generic = False
            for size in (1, 2):
                from itertools import combinations
                for subset in combinations(range(g.n), size):
                    deg = {}
                    for v in subset:
                        for c in g.var_checks(v):
                            deg[int(c)] = deg.get(int(c), 0) + 1
                    if all(d >= 2 for d in deg.values()):
                        generic = True
                        break
                if generic:
                    break
            assert min_stopping_set_leq(g, 2) == generic

    def test_budget_error(self):
        spec = regular_spec(3, 6, n=66)
        g = sample_graph(spec, 0)
        with pytest.raises(ExpurgationBudgetError):
            min_stopping_set_leq(g, 3)

    def test_expurgated_sampling_property(self):
        spec = poisson_spec(2, 0.5, n=24, s=2)
        rng = np.random.default_rng(17)
        for _ in range(50):
            g = sample_graph_expurgated(spec, rng)
            assert not min_stopping_set_leq(g, 2)

    def test_budget_fallback_warns(self):
        spec = regular_spec(3, 6, n=128, s=5)
        with pytest.warns(RuntimeWarning, match="budget"):
            sample_graph_expurgated(spec, 3)


class TestJsonRoundTrip:
    def test_standard(self):
        spec = regular_spec(3, 6, n=512, s=2)
        again = EnsembleSpec.from_json(spec.to_json())
        assert again == spec

    def test_poisson(self):
        spec = poisson_spec(3, 0.25, n=777, s=1)
        again = EnsembleSpec.from_json(spec.to_json())
        assert again == spec

    def test_schema_fields(self):
        doc = {"kind": "standard", "lambda": {"3": 1.0}, "rho": {"6": 1.0},
               "n": 100, "s": 0}
        spec = EnsembleSpec.from_json(doc)
        assert spec.kind == "standard" and spec.n == 100


class TestRoundingRepair:
    def test_exact_case_untouched(self):
        spec = regular_spec(3, 6, n=1024)
        assert spec.variable_node_counts() == {3: 1024}
        assert spec.check_node_counts() == {6: 512}

    def test_inexact_case_balances(self):
        spec = EnsembleSpec(kind="standard",
                            lam=validate_and_normalize({2: 1 / 6, 4: 5 / 6}),
                            rho=validate_and_normalize({6: 1.0}), n=1000)
        vc = spec.variable_node_counts()
        cc = spec.check_node_counts()
        assert sum(vc.values()) == 1000
        assert sum(d * c for d, c in vc.items()) == sum(d * c for d, c in cc.items())
