"""The limiting distribution of the window statistic vector.

Under the null, the vector of per-window ``-2 log(lambda)`` statistics
converges in distribution to ``Q = (Q_1, ..., Q_M)`` with

    Q_i = sum_{h=1}^r xi_{h,i}^2

where each ``xi_{h,.}`` is an M-dimensional standard Gaussian vector with
correlation matrix ``R`` (the window-overlap correlations), independent
across ``h``.  Every marginal ``Q_i`` is chi-square with ``r`` degrees of
freedom; components are dependent exactly where windows overlap, with
``Cov(Q_i, Q_j) = 2 r R[i,j]^2``.

Joint tail probabilities ``P[Q_1 > t_1, ..., Q_M > t_M]`` have no closed
form for general banded ``R``; they are estimated by seeded Monte Carlo with
a reported binomial standard error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError, NumericalError
from .rng import PURPOSE_LIMIT, substream

# Draws are generated in fixed-size blocks, one substream per block, so the
# output is bit-identical regardless of how blocks are scheduled.
_BLOCK = 1 << 14

# Eigenvalue clipping floor and the hard cap on the allowed perturbation.
_CLIP_EPS = 1e-12
_MAX_REPAIR = 1e-8


@dataclass(frozen=True)
class LimitLaw:
    """Limit distribution parameters: degrees of freedom and correlation."""

    r: int
    R: np.ndarray

    def __post_init__(self):
        arr = np.atleast_2d(np.asarray(self.R, dtype=np.float64))
        if self.r < 1:
            raise InputError(f"degrees of freedom r={self.r} must be >= 1")
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise InputError(f"correlation matrix must be square, got {arr.shape}")
        if not np.allclose(arr, arr.T, rtol=0.0, atol=1e-12):
            raise InputError("correlation matrix must be symmetric")
        if not np.allclose(np.diag(arr), 1.0, rtol=0.0, atol=1e-12):
            raise InputError("correlation matrix must have unit diagonal")
        object.__setattr__(self, "R", arr)

    @property
    def M(self) -> int:
        return self.R.shape[0]


@dataclass(frozen=True)
class LimitSampleBatch:
    """Draws from the limit law: rows of ``q`` are realizations of Q."""

    q: np.ndarray
    seed: int


def psd_repair_cholesky(R: np.ndarray) -> np.ndarray:
    """Lower-triangular factor of ``R``, repairing tiny negative eigenvalues.

    The overlap-correlation matrix is positive semidefinite in exact
    arithmetic, so only roundoff-scale repairs are legitimate: when the
    direct factorization fails, eigenvalues are clipped at ``1e-12`` and the
    diagonal renormalized to one.  If that perturbs the matrix by more than
    ``1e-8`` in max norm, a :class:`NumericalError` is raised instead of
    silently changing the law.
    """
    arr = np.atleast_2d(np.asarray(R, dtype=np.float64))
    if arr.shape[0] != arr.shape[1]:
        raise InputError(f"matrix must be square, got {arr.shape}")
    if not np.allclose(arr, arr.T, rtol=0.0, atol=1e-12):
        raise InputError("matrix must be symmetric")
    try:
        return np.linalg.cholesky(arr)
    except np.linalg.LinAlgError:
        pass
    vals, vecs = np.linalg.eigh(arr)
    clipped = np.maximum(vals, _CLIP_EPS)
    repaired = (vecs * clipped) @ vecs.T
    scale = 1.0 / np.sqrt(np.diag(repaired))
    repaired = repaired * np.outer(scale, scale)
    np.fill_diagonal(repaired, 1.0)
    shift = float(np.max(np.abs(repaired - arr)))
    if shift > _MAX_REPAIR:
        raise NumericalError(
            f"matrix is too far from positive semidefinite: repair would "
            f"move entries by {shift:.3e} (cap {_MAX_REPAIR:.0e})"
        )
    try:
        return np.linalg.cholesky(repaired)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("factorization failed after eigenvalue repair") from exc


def _q_blocks(law: LimitLaw, count: int, seed: int):
    """Yield (start, stop, q_block) with per-block deterministic substreams."""
    factor_t = psd_repair_cholesky(law.R).T
    for start in range(0, count, _BLOCK):
        stop = min(start + _BLOCK, count)
        gen = substream(seed, PURPOSE_LIMIT, start // _BLOCK)
        z = gen.standard_normal((stop - start, law.r, law.M))
        xi = z @ factor_t
        yield start, stop, np.einsum("brm,brm->bm", xi, xi)


def sample_limit_law(law: LimitLaw, count: int, seed: int) -> LimitSampleBatch:
    """Draw ``count`` realizations of Q; deterministic given (law, count, seed)."""
    if count < 1:
        raise InputError(f"draw count must be >= 1, got {count}")
    q = np.empty((count, law.M))
    for start, stop, block in _q_blocks(law, count, seed):
        q[start:stop] = block
    return LimitSampleBatch(q=q, seed=int(seed))


def chi_square_survival(r: int, z: float) -> float:
    """Upper-tail probability ``P[chi2_r > z]``.

    Evaluated through the regularized upper incomplete gamma function
    ``Q(r/2, z/2)``: a power series on ``x < a + 1`` and a continued
    fraction elsewhere.  Absolute accuracy is 1e-10 or better over
    ``r in 1..10, z in [0, 50]``.
    """
    if r < 1:
        raise InputError(f"degrees of freedom must be >= 1, got {r}")
    z = float(z)
    if math.isnan(z) or z < 0.0:
        raise InputError(f"chi-square statistic must be >= 0, got {z}")
    if z == 0.0:
        return 1.0
    a = 0.5 * r
    x = 0.5 * z
    if x < a + 1.0:
        return 1.0 - _gamma_p_series(a, x)
    return _gamma_q_contfrac(a, x)


def _gamma_p_series(a: float, x: float) -> float:
    # Lower regularized gamma P(a, x) by its power series.
    term = 1.0 / a
    total = term
    denom = a
    for _ in range(1000):
        denom += 1.0
        term *= x / denom
        total += term
        if abs(term) < abs(total) * 1e-16:
            break
    else:
        raise NumericalError("incomplete gamma series did not converge")
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_q_contfrac(a: float, x: float) -> float:
    # Upper regularized gamma Q(a, x) by the Lentz continued fraction.
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 1000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    else:
        raise NumericalError("incomplete gamma continued fraction did not converge")
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))


def chi_square_quantile(r: int, p: float) -> float:
    """Value ``q`` with ``P[chi2_r <= q] = p``, by bisection on the tail."""
    if not 0.0 < p < 1.0:
        raise InputError(f"quantile level must be in (0, 1), got {p}")
    tail = 1.0 - p
    hi = float(r) + 16.0
    while chi_square_survival(r, hi) > tail:
        hi *= 2.0
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if chi_square_survival(r, mid) > tail:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def joint_exceedance(
    law: LimitLaw, thresholds, count: int, seed: int
) -> tuple[float, float]:
    """Monte Carlo estimate of ``P[Q_1 > t_1, ..., Q_M > t_M]``.

    Returns ``(p_hat, standard_error)`` with the binomial standard error
    ``sqrt(p_hat (1 - p_hat) / count)``.  The exceedance count is an exact
    integer reduction, so the estimate does not depend on block scheduling.
    """
    t = np.asarray(thresholds, dtype=np.float64).reshape(-1)
    if t.shape != (law.M,):
        raise InputError(
            f"expected {law.M} thresholds, got {t.size}"
        )
    if np.any(t < 0.0) or not np.all(np.isfinite(t)):
        raise InputError("thresholds must be finite and >= 0")
    if count < 1000:
        raise InputError(f"draw count must be >= 1000, got {count}")
    hits = 0
    for _, _, block in _q_blocks(law, count, seed):
        hits += int(np.count_nonzero(np.all(block > t, axis=1)))
    p_hat = hits / count
    return p_hat, math.sqrt(p_hat * (1.0 - p_hat) / count)


def q_covariance(law: LimitLaw) -> np.ndarray:
    """Covariance matrix of Q under the limit law: ``2 r R[i,j]^2``."""
    return 2.0 * law.r * law.R**2
