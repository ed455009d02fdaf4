"""Maximum likelihood estimation by damped Newton iteration.

Two entry points: :func:`fit_unconstrained` maximizes over the full
parameter space, :func:`fit_constrained` over the null subspace that pins
the first ``r`` coordinates at zero (iteration then runs on the trailing
coordinates only).  Convergence means the sup-norm of the (free-coordinate)
score drops below ``tol``, which defaults to ``1e-8 * (1 + n)`` because the
log-likelihood scales with the sample size.

Newton steps use the observed Hessian with backtracking line search; when
the Hessian is not negative definite the iteration falls back to a
gradient-ascent step.  Non-convergence is reported through the ``converged``
flag rather than an exception so that simulation studies can count and
exclude failed replicates.  A maximizer on the boundary of the parameter
space (e.g. all-zero counts in the Poisson family) has no interior root of
the score; such fits either exhaust ``max_iter`` or stop at a numerically
stationary point, and callers should treat the flag as authoritative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InputError
from .models import ModelSpec, aggregate, check_data, check_theta, loglik_offset


@dataclass(frozen=True)
class HypothesisSpec:
    """Null hypothesis pinning the first ``r`` parameter coordinates at zero."""

    r: int

    def validate(self, d: int) -> None:
        if not 1 <= self.r <= d:
            raise InputError(
                f"constrained coordinate count r={self.r} must be in 1..{d}"
            )


@dataclass(frozen=True)
class SolverOptions:
    """Newton solver controls.

    ``tol`` of ``None`` selects the sample-size-scaled default.  ``init``
    chooses the starting point when none is given explicitly: the origin, or
    the family's method-of-moments point.
    """

    tol: Optional[float] = None
    max_iter: int = 100
    init: str = "origin"  # "origin" | "moment"
    min_step: float = 1e-12


@dataclass(frozen=True)
class FitResult:
    """Outcome of one likelihood maximization."""

    theta_hat: np.ndarray
    log_lik: float
    converged: bool
    iterations: int
    grad_norm: float


def _default_tol(n: int) -> float:
    return 1e-8 * (1.0 + n)


def _initial_point(
    model: ModelSpec, data: np.ndarray, init, opts: SolverOptions, zero_first: int
) -> np.ndarray:
    if init is not None:
        theta0 = check_theta(model, init)
    elif opts.init == "moment" and model.moment_init is not None:
        theta0 = check_theta(model, model.moment_init(data))
    elif opts.init == "origin" or opts.init == "moment":
        # The parameter space contains the origin by the model contract.
        theta0 = np.zeros(model.d)
    else:
        raise InputError(f"unknown init strategy {opts.init!r}")
    if zero_first and np.any(theta0[:zero_first] != 0.0):
        if init is not None:
            raise InputError(
                "constrained fit requires an init with the first "
                f"{zero_first} coordinates zero"
            )
        theta0 = theta0.copy()
        theta0[:zero_first] = 0.0
    return theta0


def _newton_direction(g_f: np.ndarray, h_ff: np.ndarray, grad_norm: float) -> np.ndarray:
    """Ascent direction: Newton when the Hessian block is negative definite,
    otherwise a normalized gradient step."""
    k = g_f.size
    if k == 1:
        h00 = h_ff[0, 0]
        if h00 < 0.0 and math.isfinite(h00):
            return g_f / -h00
    elif k == 2:
        h00, h01, h11 = h_ff[0, 0], h_ff[0, 1], h_ff[1, 1]
        det = h00 * h11 - h01 * h01
        if h00 < 0.0 and det > 0.0 and math.isfinite(det):
            return np.array(
                [
                    (h01 * g_f[1] - h11 * g_f[0]) / det,
                    (h01 * g_f[0] - h00 * g_f[1]) / det,
                ]
            )
    else:
        try:
            c = np.linalg.cholesky(-h_ff)
            direction = np.linalg.solve(c.T, np.linalg.solve(c, g_f))
            if np.all(np.isfinite(direction)):
                return direction
        except np.linalg.LinAlgError:
            pass
    return g_f / (1.0 + grad_norm)


def _maximize(
    model: ModelSpec,
    data: np.ndarray,
    theta0: np.ndarray,
    free: np.ndarray,
    opts: SolverOptions,
    offset: Optional[float] = None,
) -> FitResult:
    tol = _default_tol(data.shape[0]) if opts.tol is None else float(opts.tol)
    if offset is None:
        offset = loglik_offset(model, data)
    theta = theta0.copy()

    if free.size == 0:
        ll, _, _ = aggregate(model, data, theta)
        return FitResult(theta, float(ll + offset), True, 0, 0.0)

    all_free = free.size == model.d
    ix = None if all_free else np.ix_(free, free)
    ll, g, h = aggregate(model, data, theta)
    steps = 0
    converged = False
    grad_norm = float(np.max(np.abs(g[free])))
    for _ in range(opts.max_iter):
        grad_norm = float(np.max(np.abs(g[free])))
        if grad_norm <= tol:
            converged = True
            break
        g_f = g if all_free else g[free]
        h_ff = h if all_free else h[ix]
        direction = _newton_direction(g_f, h_ff, grad_norm)

        # Near the maximum the true improvement of the last Newton step can
        # sit below the float64 granularity of the log-likelihood, so the
        # acceptance test allows a decrease within rounding noise.
        slack = 1e-12 * (1.0 + abs(ll))
        alpha = 1.0
        accepted = False
        while alpha >= opts.min_step:
            cand = theta.copy()
            cand[free] += alpha * direction
            if model.param_domain(cand):
                ll_new, g_new, h_new = aggregate(model, data, cand)
                at_optimum = float(np.max(np.abs(g_new[free]))) <= tol
                if np.isfinite(ll_new) and (ll_new >= ll - slack or at_optimum):
                    theta, ll, g, h = cand, ll_new, g_new, h_new
                    steps += 1
                    accepted = True
                    break
            alpha *= 0.5
        if not accepted:
            break

    if not converged:
        # The final accepted step may already satisfy the criterion even if
        # the loop ran out of iterations or the line search stalled.
        grad_norm = float(np.max(np.abs(g[free])))
        converged = grad_norm <= tol
    return FitResult(theta, float(ll + offset), converged, steps, grad_norm)


def fit_unconstrained(
    model: ModelSpec,
    data,
    init=None,
    opts: SolverOptions = SolverOptions(),
) -> FitResult:
    """Maximize the log-likelihood over the full parameter space."""
    arr = check_data(model, data)
    theta0 = _initial_point(model, arr, init, opts, zero_first=0)
    free = np.arange(model.d)
    return _maximize(model, arr, theta0, free, opts)


def fit_constrained(
    model: ModelSpec,
    data,
    hyp: HypothesisSpec,
    init=None,
    opts: SolverOptions = SolverOptions(),
) -> FitResult:
    """Maximize the log-likelihood with the first ``r`` coordinates at zero.

    The returned parameter has its leading ``r`` coordinates exactly zero.
    When ``r = d`` the null subspace is the single point at the origin and no
    iteration happens.
    """
    arr = check_data(model, data)
    hyp.validate(model.d)
    theta0 = _initial_point(model, arr, init, opts, zero_first=hyp.r)
    free = np.arange(hyp.r, model.d)
    return _maximize(model, arr, theta0, free, opts)


def fit_pair(
    model: ModelSpec,
    data,
    hyp: HypothesisSpec,
    opts: SolverOptions = SolverOptions(),
) -> tuple[FitResult, FitResult]:
    """Unconstrained and constrained fits of one dataset.

    Equivalent to calling :func:`fit_unconstrained` and
    :func:`fit_constrained` with default initialization, but validates the
    data and computes the parameter-free log-likelihood terms only once,
    which matters inside replicate loops.
    """
    arr = check_data(model, data)
    hyp.validate(model.d)
    offset = loglik_offset(model, arr)
    theta0_u = _initial_point(model, arr, None, opts, zero_first=0)
    fu = _maximize(model, arr, theta0_u, np.arange(model.d), opts, offset=offset)
    theta0_c = _initial_point(model, arr, None, opts, zero_first=hyp.r)
    fc = _maximize(
        model, arr, theta0_c, np.arange(hyp.r, model.d), opts, offset=offset
    )
    return fu, fc
