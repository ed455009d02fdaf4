"""Pure-numpy implementations of the accumulation kernels.

Each ``*_agg`` function returns the triple ``(loglik_var, grad, hess)``
summed over all observations, where ``loglik_var`` omits parameter-free
terms (those are supplied once per dataset by the matching ``*_const``
function).  Dropping the constants keeps repeated Newton iterations cheap
without changing gradients, Hessians, or likelihood differences.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln

NAME = "python"


def gaussian_mean_agg(x: np.ndarray, theta: np.ndarray, prec: np.ndarray):
    """Gaussian location family with known precision matrix ``prec``."""
    r = x - theta
    pr = r @ prec
    ll = -0.5 * float(np.einsum("ij,ij->", pr, r))
    grad = pr.sum(axis=0)
    hess = -x.shape[0] * prec
    return ll, grad, hess


def gaussian_meanlogsd_agg(x: np.ndarray, mu: float, s: float):
    """Scalar Gaussian with parameters (mean, log standard deviation)."""
    n = x.shape[0]
    w = math.exp(-2.0 * s)
    r = x - mu
    s1 = float(r.sum())
    s2 = float(r @ r)
    ll = -n * s - 0.5 * w * s2
    grad = np.array([w * s1, -float(n) + w * s2])
    hess = np.array([[-n * w, -2.0 * w * s1], [-2.0 * w * s1, -2.0 * w * s2]])
    return ll, grad, hess


def poisson_lograte_agg(x: np.ndarray, theta: float, baseline: float):
    """Poisson counts with rate ``baseline * exp(theta)``."""
    n = x.shape[0]
    sx = float(x.sum())
    nlam = n * baseline * math.exp(theta)
    ll = theta * sx - nlam
    grad = np.array([sx - nlam])
    hess = np.array([[-nlam]])
    return ll, grad, hess


def poisson_loglik_const(x: np.ndarray, baseline: float) -> float:
    """Parameter-free part of the Poisson log-likelihood."""
    return float(math.log(baseline) * x.sum() - gammaln(x + 1.0).sum())
