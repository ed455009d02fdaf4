"""Parametric model families: densities, derivatives, information, sampling.

A model is a family of densities ``f(x | theta)`` over an open parameter
space containing the origin.  The package works with any :class:`ModelSpec`
that supplies per-observation quantities; the builtin families additionally
install fast one-pass accumulators (see ``_kernels``) used by the fitting
code, and an analytic Fisher information matrix.

Observation containers are plain numpy arrays: shape ``(n, d)`` for
vector-observation families and ``(n,)`` for scalar and count families.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Any, Callable, Optional, Sequence

import numpy as np

from ._kernels import backend
from .errors import DomainError, InputError, NumericalError
from .rng import PURPOSE_FISHER, substream

_LOG_2PI = math.log(2.0 * math.pi)

# Central-difference step per coordinate: h = FD_STEP * (1 + |theta_k|).
FD_STEP = 1e-5

AggFn = Callable[[np.ndarray, np.ndarray], tuple[float, np.ndarray, np.ndarray]]


@dataclass(frozen=True)
class ModelSpec:
    """A parametric family with densities, derivatives and a sampler.

    ``log_density``, ``grad`` and ``hessian`` act on a single observation.
    ``agg_var``/``loglik_const`` are optional fast paths: ``agg_var`` returns
    the log-likelihood without parameter-free terms, plus the score and
    Hessian, summed over an observation array; ``loglik_const`` supplies the
    omitted constant.  When absent, a generic per-observation loop is used.

    The parameter space is an open subset of R^d containing the origin,
    decided by ``param_domain``.  Regularity (smoothness of the density in
    theta, differentiation under the integral, a dominated local bound on
    second derivatives, positive definite Fisher information,
    identifiability) is a contract on the family; the builtin families
    satisfy it analytically, and :func:`check_regularity` probes the
    machine-checkable parts.
    """

    name: str
    d: int
    log_density: Callable[[Any, np.ndarray], float]
    grad: Callable[[Any, np.ndarray], np.ndarray]
    hessian: Callable[[Any, np.ndarray], np.ndarray]
    sampler: Callable[[np.ndarray, int, np.random.Generator], np.ndarray]
    param_domain: Callable[[np.ndarray], bool]
    fisher: Optional[Callable[[np.ndarray], np.ndarray]] = None
    agg_var: Optional[AggFn] = None
    loglik_const: Optional[Callable[[np.ndarray], float]] = None
    moment_init: Optional[Callable[[np.ndarray], np.ndarray]] = None
    validate_data: Optional[Callable[[np.ndarray], None]] = None
    data_columns: int = 1
    vector_obs: bool = False

    def without_analytic_fisher(self) -> "ModelSpec":
        """Copy of the model with the analytic Fisher matrix removed."""
        return replace(self, fisher=None)


def check_theta(model: ModelSpec, theta: Sequence[float] | np.ndarray) -> np.ndarray:
    """Validate a parameter vector and return it as a float64 array."""
    t = np.asarray(theta, dtype=np.float64).reshape(-1)
    if t.shape != (model.d,):
        raise InputError(
            f"parameter vector has length {t.size}, model dimension is {model.d}"
        )
    if not np.all(np.isfinite(t)):
        raise DomainError("parameter vector has non-finite coordinates")
    if not model.param_domain(t):
        raise DomainError(f"parameter {t.tolist()} outside the parameter space")
    return t


def check_data(model: ModelSpec, data: np.ndarray) -> np.ndarray:
    """Validate an observation array and return it as contiguous float64."""
    arr = np.ascontiguousarray(data, dtype=np.float64)
    if arr.size == 0:
        raise InputError("empty observation array")
    if model.vector_obs:
        if arr.ndim == 1 and model.data_columns == 1:
            arr = arr.reshape(-1, 1)
        if arr.ndim != 2 or arr.shape[1] != model.data_columns:
            raise InputError(
                f"expected observations with {model.data_columns} columns, "
                f"got shape {arr.shape}"
            )
    elif arr.ndim != 1:
        raise InputError(f"expected scalar observations, got shape {arr.shape}")
    if model.validate_data is not None:
        model.validate_data(arr)
    return arr


def aggregate(
    model: ModelSpec, data: np.ndarray, theta: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray]:
    """Summed (variable log-likelihood, score, Hessian) over ``data``.

    Falls back to a per-observation loop for models without a fast path.
    """
    if model.agg_var is not None:
        return model.agg_var(data, theta)
    ll = 0.0
    g = np.zeros(model.d)
    h = np.zeros((model.d, model.d))
    for row in data:
        ll += model.log_density(row, theta)
        g += model.grad(row, theta)
        h += model.hessian(row, theta)
    return ll, g, h


def loglik_offset(model: ModelSpec, data: np.ndarray) -> float:
    """Parameter-free part of the log-likelihood (0 for generic models)."""
    if model.loglik_const is not None:
        return model.loglik_const(data)
    return 0.0


def log_likelihood(model: ModelSpec, theta, data) -> float:
    """Sum of log densities of ``data`` at ``theta``.

    Returns ``-inf`` when some observation has zero density.  Raises
    :class:`DomainError` for parameters outside the model space and
    :class:`InputError` for empty data.
    """
    t = check_theta(model, theta)
    arr = check_data(model, data)
    ll, _, _ = aggregate(model, arr, t)
    return float(ll + loglik_offset(model, arr))


def fisher_information(
    model: ModelSpec,
    theta,
    *,
    n_samples: int = 100_000,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Fisher information matrix at ``theta``.

    Uses the model's analytic matrix when available, otherwise the Monte
    Carlo estimate ``-(1/N) * sum_i hessian(X_i, theta)`` over ``n_samples``
    draws at ``theta``.  The estimate is symmetrized and checked for
    positive definiteness.
    """
    t = check_theta(model, theta)
    if model.fisher is not None:
        return np.array(model.fisher(t), dtype=np.float64)
    if rng is None:
        rng = substream(0, PURPOSE_FISHER, 0)
    draws = check_data(model, model.sampler(t, int(n_samples), rng))
    _, _, hess_sum = aggregate(model, draws, t)
    est = -hess_sum / draws.shape[0]
    est = 0.5 * (est + est.T)
    eigs = np.linalg.eigvalsh(est)
    if eigs[0] <= 1e-12 * max(1.0, abs(eigs[-1])):
        raise NumericalError(
            f"Monte Carlo Fisher estimate not positive definite "
            f"(min eigenvalue {eigs[0]:.3e})"
        )
    return est


@dataclass(frozen=True)
class RegularityReport:
    """Finite-difference diagnostics for a model at one parameter point.

    ``max_grad_rel_err`` compares the analytic score against central
    differences of the log density; ``max_hess_rel_err`` compares the
    Hessian against central differences of the score.  Relative errors are
    measured as ``|a - b| / (1 + |a|)``.  ``fisher_min_eigenvalue`` probes
    positive definiteness of the information matrix.
    """

    max_grad_rel_err: float
    max_hess_rel_err: float
    fisher_min_eigenvalue: float
    n_probes: int


def check_regularity(model: ModelSpec, theta, probes) -> RegularityReport:
    """Compare analytic derivatives with finite differences at ``probes``.

    This is a report, not a gate: nothing is raised for large errors.
    """
    t = check_theta(model, theta)
    probe_list = list(probes)
    if len(probe_list) == 0:
        raise InputError("at least one probe observation is required")
    steps = FD_STEP * (1.0 + np.abs(t))
    max_g = 0.0
    max_h = 0.0
    for x in probe_list:
        g = np.asarray(model.grad(x, t), dtype=np.float64).reshape(model.d)
        h = np.asarray(model.hessian(x, t), dtype=np.float64)
        fd_g = np.empty(model.d)
        fd_h = np.empty((model.d, model.d))
        for k in range(model.d):
            tp = t.copy()
            tm = t.copy()
            tp[k] += steps[k]
            tm[k] -= steps[k]
            fd_g[k] = (model.log_density(x, tp) - model.log_density(x, tm)) / (
                2.0 * steps[k]
            )
            gp = np.asarray(model.grad(x, tp), dtype=np.float64)
            gm = np.asarray(model.grad(x, tm), dtype=np.float64)
            fd_h[:, k] = (gp - gm) / (2.0 * steps[k])
        max_g = max(max_g, float(np.max(np.abs(g - fd_g) / (1.0 + np.abs(g)))))
        max_h = max(max_h, float(np.max(np.abs(h - fd_h) / (1.0 + np.abs(h)))))
    eigs = np.linalg.eigvalsh(fisher_information(model, t))
    return RegularityReport(
        max_grad_rel_err=max_g,
        max_hess_rel_err=max_h,
        fisher_min_eigenvalue=float(eigs[0]),
        n_probes=len(probe_list),
    )


def _finite_domain(theta: np.ndarray) -> bool:
    # All builtin families use the whole of R^d.
    return bool(np.all(np.isfinite(theta)))


def gaussian_mean(cov) -> ModelSpec:
    """Gaussian observations with unknown mean and known covariance.

    ``cov`` must be symmetric positive definite (checked by factorization at
    construction, so the information matrix ``cov^{-1}`` is positive definite
    everywhere by design).  Observations are rows of shape ``(d,)``.
    """
    sigma = np.atleast_2d(np.asarray(cov, dtype=np.float64))
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise InputError(f"covariance must be square, got shape {sigma.shape}")
    if not np.allclose(sigma, sigma.T, rtol=1e-12, atol=1e-12):
        raise InputError("covariance must be symmetric")
    try:
        chol = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError as exc:
        raise InputError("covariance must be positive definite") from exc
    d = sigma.shape[0]
    prec = np.linalg.inv(sigma)
    prec = np.ascontiguousarray(0.5 * (prec + prec.T))
    logdet = 2.0 * float(np.log(np.diag(chol)).sum())
    point_const = -0.5 * (d * _LOG_2PI + logdet)

    def log_density(x, theta):
        r = np.atleast_1d(np.asarray(x, dtype=np.float64)) - theta
        return float(point_const - 0.5 * (r @ prec @ r))

    def grad(x, theta):
        r = np.atleast_1d(np.asarray(x, dtype=np.float64)) - theta
        return prec @ r

    def hessian(x, theta):
        return -prec.copy()

    def sampler(theta, count, rng):
        z = rng.standard_normal((count, d))
        return z @ chol.T + theta

    def agg_var(data, theta):
        return backend.gaussian_mean_agg(data, theta, prec)

    def loglik_const(data):
        return data.shape[0] * point_const

    def validate_data(arr):
        if not np.all(np.isfinite(arr)):
            raise InputError("observations must be finite")

    return ModelSpec(
        name="gaussian_mean",
        d=d,
        log_density=log_density,
        grad=grad,
        hessian=hessian,
        sampler=sampler,
        param_domain=_finite_domain,
        fisher=lambda theta: prec.copy(),
        agg_var=agg_var,
        loglik_const=loglik_const,
        moment_init=lambda data: data.mean(axis=0),
        validate_data=validate_data,
        data_columns=d,
        vector_obs=True,
    )


def gaussian_mean_log_sd() -> ModelSpec:
    """Scalar Gaussian with parameters (mean, log standard deviation).

    ``theta = (mu, s)`` parameterizes N(mu, exp(2 s)); the parameter space is
    all of R^2, so the variance stays positive without constraints.  With one
    constrained coordinate the null fixes the mean at zero with free
    variance.
    """

    def log_density(x, theta):
        mu, s = theta
        w = math.exp(-2.0 * s)
        r = float(x) - mu
        return -0.5 * _LOG_2PI - s - 0.5 * w * r * r

    def grad(x, theta):
        mu, s = theta
        w = math.exp(-2.0 * s)
        r = float(x) - mu
        return np.array([w * r, -1.0 + w * r * r])

    def hessian(x, theta):
        mu, s = theta
        w = math.exp(-2.0 * s)
        r = float(x) - mu
        return np.array([[-w, -2.0 * w * r], [-2.0 * w * r, -2.0 * w * r * r]])

    def fisher(theta):
        w = math.exp(-2.0 * theta[1])
        return np.array([[w, 0.0], [0.0, 2.0]])

    def sampler(theta, count, rng):
        return theta[0] + math.exp(theta[1]) * rng.standard_normal(count)

    def agg_var(data, theta):
        return backend.gaussian_meanlogsd_agg(data, float(theta[0]), float(theta[1]))

    def moment_init(data):
        var = float(data.var())
        return np.array([float(data.mean()), 0.5 * math.log(max(var, 1e-12))])

    def validate_data(arr):
        if not np.all(np.isfinite(arr)):
            raise InputError("observations must be finite")

    return ModelSpec(
        name="gaussian_mean_log_sd",
        d=2,
        log_density=log_density,
        grad=grad,
        hessian=hessian,
        sampler=sampler,
        param_domain=_finite_domain,
        fisher=fisher,
        agg_var=agg_var,
        loglik_const=lambda data: -0.5 * data.shape[0] * _LOG_2PI,
        moment_init=moment_init,
        validate_data=validate_data,
        data_columns=1,
    )


def poisson_log_rate(baseline: float) -> ModelSpec:
    """Poisson counts with rate ``baseline * exp(theta)``, d = 1.

    ``theta = 0`` means the counts follow the baseline rate; positive theta
    models an elevated rate (a transient source brightening against a known
    background level, for instance).
    """
    c = float(baseline)
    if not (c > 0.0 and math.isfinite(c)):
        raise InputError(f"baseline rate must be positive, got {baseline}")
    log_c = math.log(c)

    def log_density(x, theta):
        xv = float(x)
        lam = c * math.exp(theta[0])
        return xv * (log_c + theta[0]) - lam - math.lgamma(xv + 1.0)

    def grad(x, theta):
        return np.array([float(x) - c * math.exp(theta[0])])

    def hessian(x, theta):
        return np.array([[-c * math.exp(theta[0])]])

    def sampler(theta, count, rng):
        return rng.poisson(c * math.exp(theta[0]), count).astype(np.float64)

    def agg_var(data, theta):
        return backend.poisson_lograte_agg(data, float(theta[0]), c)

    def moment_init(data):
        mean = float(data.mean())
        if mean <= 0.0:
            return np.zeros(1)
        return np.array([math.log(mean / c)])

    def validate_data(arr):
        if not np.all(np.isfinite(arr)):
            raise InputError("counts must be finite")
        if np.any(arr < 0) or not np.all(arr == np.floor(arr)):
            raise InputError("counts must be nonnegative integers")

    return ModelSpec(
        name="poisson_log_rate",
        d=1,
        log_density=log_density,
        grad=grad,
        hessian=hessian,
        sampler=sampler,
        param_domain=_finite_domain,
        fisher=lambda theta: np.array([[c * math.exp(theta[0])]]),
        agg_var=agg_var,
        loglik_const=lambda data: backend.poisson_loglik_const(data, c),
        moment_init=moment_init,
        validate_data=validate_data,
        data_columns=1,
    )


def build_model(name: str, params: dict) -> ModelSpec:
    """Construct a builtin model from its registry name and parameters."""
    if name == "gaussian_mean":
        unknown = set(params) - {"cov"}
        if unknown:
            raise InputError(f"unknown gaussian_mean parameters: {sorted(unknown)}")
        if "cov" not in params:
            raise InputError("gaussian_mean requires a 'cov' parameter")
        return gaussian_mean(np.asarray(params["cov"], dtype=np.float64))
    if name == "gaussian_mean_log_sd":
        if params:
            raise InputError(
                f"gaussian_mean_log_sd takes no parameters, got {sorted(params)}"
            )
        return gaussian_mean_log_sd()
    if name == "poisson_log_rate":
        unknown = set(params) - {"baseline"}
        if unknown:
            raise InputError(f"unknown poisson_log_rate parameters: {sorted(unknown)}")
        if "baseline" not in params:
            raise InputError("poisson_log_rate requires a 'baseline' parameter")
        return poisson_log_rate(float(params["baseline"]))
    raise InputError(f"unknown model name: {name!r}")
