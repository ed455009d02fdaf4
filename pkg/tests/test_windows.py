"""Window schemes, overlap correlations, and the likelihood-ratio vector.

The overlap-correlation oracle in this file evaluates the defining ratio
literally (overlap sum over the square root of the double sum of sample-size
products), independently of the implementation's factorization of the
denominator.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lrscan.errors import InputError
from lrscan.mle import HypothesisSpec, fit_constrained, fit_unconstrained
from lrscan.models import gaussian_mean, gaussian_mean_log_sd
from lrscan.windows import (
    Dataset,
    GroupingScheme,
    asymptotic_mle_covariance,
    lr_vector,
    overlap_correlation,
)


def oracle_correlation(G, n):
    """Literal evaluation of the overlap-correlation ratio."""
    P = len(n)
    M = P - G + 1
    R = np.zeros((M, M))
    for i in range(M):
        for j in range(M):
            if i == j:
                R[i, j] = 1.0
            elif abs(i - j) >= G:
                R[i, j] = 0.0
            else:
                a, b = max(i, j), min(i, j) + G - 1
                num = float(np.sum(n[a : b + 1]))
                qs = np.asarray(n[i : i + G], dtype=float)
                ls = np.asarray(n[j : j + G], dtype=float)
                den = math.sqrt(float(np.sum(np.outer(qs, ls))))
                R[i, j] = num / den
    return R


scheme_strategy = st.integers(min_value=1, max_value=12).flatmap(
    lambda p: st.tuples(
        st.integers(min_value=1, max_value=p),
        st.lists(
            st.integers(min_value=1, max_value=10**6), min_size=p, max_size=p
        ),
    )
)


class TestOverlapCorrelation:
    def test_equal_sizes_half(self):
        R = overlap_correlation(GroupingScheme(G=2, n=(100, 100, 100)))
        np.testing.assert_array_equal(R, [[1.0, 0.5], [0.5, 1.0]])

    def test_width_one_gives_identity(self):
        R = overlap_correlation(GroupingScheme(G=1, n=(17, 5)))
        np.testing.assert_array_equal(R, np.eye(2))

    def test_unequal_sizes(self):
        # overlap 300 over sqrt(400 * 400)
        R = overlap_correlation(GroupingScheme(G=2, n=(100, 300, 100)))
        assert R[0, 1] == 0.75

    @given(gn=scheme_strategy)
    @settings(max_examples=200, deadline=None)
    def test_structure_is_exact(self, gn):
        G, n = gn
        scheme = GroupingScheme(G=G, n=tuple(n))
        R = overlap_correlation(scheme)
        M = scheme.M
        np.testing.assert_array_equal(R, R.T)
        np.testing.assert_array_equal(np.diag(R), np.ones(M))
        assert np.all((R >= 0.0) & (R <= 1.0))
        for i in range(M):
            for j in range(M):
                if abs(i - j) >= G:
                    assert R[i, j] == 0.0

    @given(
        p=st.integers(min_value=1, max_value=12),
        size=st.integers(min_value=1, max_value=10**6),
        g=st.integers(min_value=1, max_value=12),
    )
    @settings(max_examples=100, deadline=None)
    def test_equal_sizes_closed_form(self, p, size, g):
        g = min(g, p)
        scheme = GroupingScheme(G=g, n=(size,) * p)
        R = overlap_correlation(scheme)
        for i in range(scheme.M):
            for j in range(scheme.M):
                k = abs(i - j)
                expected = (g - k) / g if k < g else 0.0
                assert R[i, j] == expected

    @given(gn=scheme_strategy)
    @settings(max_examples=100, deadline=None)
    def test_matches_literal_oracle(self, gn):
        G, n = gn
        R = overlap_correlation(GroupingScheme(G=G, n=tuple(n)))
        np.testing.assert_array_equal(R, oracle_correlation(G, n))


class TestGroupingScheme:
    def test_window_layout(self):
        scheme = GroupingScheme(G=2, n=(5, 6, 7))
        assert scheme.P == 3 and scheme.M == 2
        assert list(scheme.window_populations(0)) == [0, 1]
        assert list(scheme.window_populations(1)) == [1, 2]
        assert scheme.window_size(0) == 11 and scheme.window_size(1) == 13

    def test_invalid_schemes_rejected(self):
        with pytest.raises(InputError):
            GroupingScheme(G=4, n=(5, 6, 7))
        with pytest.raises(InputError):
            GroupingScheme(G=0, n=(5,))
        with pytest.raises(InputError):
            GroupingScheme(G=1, n=(0,))
        with pytest.raises(InputError):
            GroupingScheme(G=1, n=())


class TestLRVector:
    def test_known_variance_gaussian_closed_form(self):
        """Single window: the statistic is N * mean^2 for unit variance."""
        model = gaussian_mean([[1.0]])
        rng = np.random.default_rng(3)
        pops = [rng.standard_normal((30, 1)), rng.standard_normal((20, 1))]
        scheme = GroupingScheme(G=2, n=(30, 20))
        data = Dataset.from_arrays(model, scheme, pops)
        res = lr_vector(model, data, scheme, HypothesisSpec(r=1))
        assert not res.failed.any()
        pooled = np.concatenate(pops)
        expected = 50.0 * float(pooled.mean()) ** 2
        assert math.isclose(res.stats[0], expected, rel_tol=1e-8, abs_tol=1e-10)

    def test_all_zero_data_gives_zero_vector(self):
        model = gaussian_mean([[1.0]])
        scheme = GroupingScheme(G=2, n=(10, 10, 10))
        data = Dataset.from_arrays(model, scheme, [np.zeros((10, 1))] * 3)
        res = lr_vector(model, data, scheme, HypothesisSpec(r=1))
        assert not res.failed.any()
        np.testing.assert_array_equal(res.stats, np.zeros(2))

    def test_adjacent_windows_share_population_bytes(self):
        model = gaussian_mean([[1.0]])
        rng = np.random.default_rng(4)
        pops = [rng.standard_normal((6, 1)) for _ in range(3)]
        scheme = GroupingScheme(G=2, n=(6, 6, 6))
        data = Dataset.from_arrays(model, scheme, pops)
        w0 = data.pooled(scheme, 0)
        w1 = data.pooled(scheme, 1)
        np.testing.assert_array_equal(w0[6:], w1[:6])
        np.testing.assert_array_equal(w0[6:], pops[1])

    def test_single_window_matches_direct_two_fit_computation(self):
        model = gaussian_mean_log_sd()
        rng = np.random.default_rng(5)
        pops = [1.3 * rng.standard_normal(40) + 0.2]
        scheme = GroupingScheme(G=1, n=(40,))
        data = Dataset.from_arrays(model, scheme, pops)
        hyp = HypothesisSpec(r=1)
        res = lr_vector(model, data, scheme, hyp)
        fu = fit_unconstrained(model, pops[0])
        fc = fit_constrained(model, pops[0], hyp)
        direct = -2.0 * (fc.log_lik - fu.log_lik)
        assert math.isclose(res.stats[0], direct, rel_tol=1e-12)

    def test_components_nonnegative(self):
        model = gaussian_mean_log_sd()
        rng = np.random.default_rng(6)
        scheme = GroupingScheme(G=3, n=(25, 25, 25, 25))
        data = Dataset.from_arrays(
            model, scheme, [rng.standard_normal(25) for _ in range(4)]
        )
        res = lr_vector(model, data, scheme, HypothesisSpec(r=2))
        assert not res.failed.any()
        assert np.all(res.stats >= 0.0)

    def test_shape_mismatch_rejected(self):
        model = gaussian_mean([[1.0]])
        scheme = GroupingScheme(G=1, n=(4, 4))
        with pytest.raises(InputError):
            Dataset.from_arrays(
                model, scheme, [np.zeros((4, 1)), np.zeros((5, 1))]
            )


class TestAsymptoticMLECovariance:
    def test_single_window_is_inverse_fisher(self):
        model = gaussian_mean([[4.0]])
        out = asymptotic_mle_covariance(model, [0.0], GroupingScheme(G=1, n=(9,)))
        np.testing.assert_allclose(out, [[4.0]], rtol=1e-12)

    def test_equal_n_two_windows(self):
        model = gaussian_mean([[1.0]])
        out = asymptotic_mle_covariance(
            model, [0.0], GroupingScheme(G=2, n=(50, 50, 50))
        )
        np.testing.assert_allclose(out, [[1.0, 0.5], [0.5, 1.0]], rtol=1e-12)

    def test_disjoint_windows_block_diagonal(self):
        model = gaussian_mean([[2.0, 0.5], [0.5, 1.0]])
        scheme = GroupingScheme(G=1, n=(10, 10, 10))
        out = asymptotic_mle_covariance(model, [0.1, -0.2], scheme)
        inv = np.linalg.inv(np.linalg.inv([[2.0, 0.5], [0.5, 1.0]]))
        expected = np.kron(np.eye(3), inv)
        np.testing.assert_allclose(out, expected, rtol=1e-10, atol=1e-12)
