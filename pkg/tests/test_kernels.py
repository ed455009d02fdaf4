"""Backend equivalence and correctness of the accumulation kernels.

The reference for every kernel is a literal per-observation sum of the
model's single-point log density, score, and Hessian.
"""

import math

import numpy as np
import pytest

from lrscan._kernels import _fallback
from lrscan.models import gaussian_mean, gaussian_mean_log_sd, poisson_log_rate

try:
    from lrscan._kernels import _core
except ImportError:
    _core = None

BACKENDS = [_fallback] + ([] if _core is None else [_core])


def _per_observation_sum(model, data, theta):
    ll = 0.0
    g = np.zeros(model.d)
    h = np.zeros((model.d, model.d))
    for row in data:
        ll += model.log_density(row, theta)
        g += model.grad(row, theta)
        h += model.hessian(row, theta)
    return ll, g, h


@pytest.mark.parametrize("backend", BACKENDS, ids=lambda b: b.NAME)
class TestAgainstPerObservationSums:
    def test_gaussian_mean(self, backend):
        rng = np.random.default_rng(0)
        cov = np.array([[2.0, 0.3], [0.3, 1.0]])
        model = gaussian_mean(cov)
        data = np.ascontiguousarray(rng.normal(size=(37, 2)))
        theta = np.array([0.4, -0.2])
        prec = np.linalg.inv(cov)
        prec = np.ascontiguousarray(0.5 * (prec + prec.T))
        ll_var, grad, hess = backend.gaussian_mean_agg(data, theta, prec)
        ll_ref, g_ref, h_ref = _per_observation_sum(model, data, theta)
        const = model.loglik_const(data)
        assert math.isclose(ll_var + const, ll_ref, rel_tol=1e-10)
        np.testing.assert_allclose(grad, g_ref, rtol=1e-9, atol=1e-9)
        np.testing.assert_allclose(hess, h_ref, rtol=1e-9, atol=1e-9)

    def test_gaussian_meanlogsd(self, backend):
        rng = np.random.default_rng(1)
        model = gaussian_mean_log_sd()
        data = np.ascontiguousarray(rng.normal(size=51))
        theta = np.array([0.2, -0.4])
        ll_var, grad, hess = backend.gaussian_meanlogsd_agg(data, 0.2, -0.4)
        ll_ref, g_ref, h_ref = _per_observation_sum(model, data, theta)
        const = model.loglik_const(data)
        assert math.isclose(ll_var + const, ll_ref, rel_tol=1e-10)
        np.testing.assert_allclose(grad, g_ref, rtol=1e-9, atol=1e-9)
        np.testing.assert_allclose(hess, h_ref, rtol=1e-9, atol=1e-9)

    def test_poisson(self, backend):
        rng = np.random.default_rng(2)
        model = poisson_log_rate(3.0)
        data = np.ascontiguousarray(rng.poisson(3.0, size=64).astype(float))
        theta = np.array([0.3])
        ll_var, grad, hess = backend.poisson_lograte_agg(data, 0.3, 3.0)
        const = backend.poisson_loglik_const(data, 3.0)
        ll_ref, g_ref, h_ref = _per_observation_sum(model, data, theta)
        assert math.isclose(ll_var + const, ll_ref, rel_tol=1e-10)
        np.testing.assert_allclose(grad, g_ref, rtol=1e-9, atol=1e-9)
        np.testing.assert_allclose(hess, h_ref, rtol=1e-9, atol=1e-9)

    def test_poisson_const_against_fsum(self, backend):
        data = np.ascontiguousarray(np.arange(20, dtype=float))
        baseline = 2.5
        ref = math.fsum(
            math.log(baseline) * x - math.lgamma(x + 1.0) for x in data
        )
        assert math.isclose(
            backend.poisson_loglik_const(data, baseline), ref, rel_tol=1e-12
        )


@pytest.mark.skipif(_core is None, reason="compiled kernels not built")
class TestBackendAgreement:
    """Compiled and fallback kernels agree to summation roundoff."""

    def test_all_kernels(self):
        rng = np.random.default_rng(3)
        x2 = np.ascontiguousarray(rng.normal(size=(200, 2)))
        prec = np.ascontiguousarray(np.linalg.inv([[1.5, 0.2], [0.2, 0.8]]))
        prec = np.ascontiguousarray(0.5 * (prec + prec.T))
        theta2 = np.array([0.1, -0.3])
        for a, b in zip(
            _core.gaussian_mean_agg(x2, theta2, prec),
            _fallback.gaussian_mean_agg(x2, theta2, prec),
        ):
            np.testing.assert_allclose(a, b, rtol=1e-11, atol=1e-11)

        x1 = np.ascontiguousarray(rng.normal(size=300))
        for a, b in zip(
            _core.gaussian_meanlogsd_agg(x1, 0.05, 0.2),
            _fallback.gaussian_meanlogsd_agg(x1, 0.05, 0.2),
        ):
            np.testing.assert_allclose(a, b, rtol=1e-11, atol=1e-11)

        counts = np.ascontiguousarray(rng.poisson(4.0, 300).astype(float))
        for a, b in zip(
            _core.poisson_lograte_agg(counts, -0.2, 4.0),
            _fallback.poisson_lograte_agg(counts, -0.2, 4.0),
        ):
            np.testing.assert_allclose(a, b, rtol=1e-11, atol=1e-11)
        assert math.isclose(
            _core.poisson_loglik_const(counts, 4.0),
            _fallback.poisson_loglik_const(counts, 4.0),
            rel_tol=1e-11,
        )
