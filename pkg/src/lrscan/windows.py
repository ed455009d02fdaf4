"""Overlapping sample windows and the likelihood-ratio vector.

``P`` populations with per-population sample sizes ``n_1..n_P`` are grouped
into ``M = P - G + 1`` windows of ``G`` consecutive populations; window ``i``
(0-based) pools populations ``i .. i+G-1``.  Windows that share populations
produce stochastically dependent test statistics; their correlation is the
shared sample mass over the geometric mean of the window masses:

    R[i, j] = sum(n_p, p in overlap) / sqrt(W_i * W_j),   |i - j| < G
    R[i, j] = 0                                           otherwise

with ``W_i`` the total sample size of window ``i``.  This finite-sample
ratio is the plug-in version of the asymptotic correlation; for sample-size
sequences whose ratio does not converge, the plug-in value is still
computed, but asymptotic guarantees no longer apply.

Each window's statistic is ``-2 log(lambda)`` where ``lambda`` is the ratio
of the null-constrained to the unconstrained maximized likelihood of the
pooled window data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import InputError
from .mle import FitResult, HypothesisSpec, SolverOptions, fit_pair
from .models import ModelSpec, check_data, check_theta, fisher_information


@dataclass(frozen=True)
class GroupingScheme:
    """Window layout: group width ``G`` and per-population sample sizes."""

    G: int
    n: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "n", tuple(int(v) for v in self.n))
        if len(self.n) < 1:
            raise InputError("at least one population is required")
        if any(v < 1 for v in self.n):
            raise InputError("all population sample sizes must be >= 1")
        if not 1 <= self.G <= len(self.n):
            raise InputError(
                f"group width G={self.G} must be in 1..{len(self.n)}"
            )

    @property
    def P(self) -> int:
        return len(self.n)

    @property
    def M(self) -> int:
        return self.P - self.G + 1

    def window_populations(self, i: int) -> range:
        """Populations pooled by window ``i`` (0-based)."""
        if not 0 <= i < self.M:
            raise InputError(f"window index {i} out of range 0..{self.M - 1}")
        return range(i, i + self.G)

    def window_size(self, i: int) -> int:
        """Total sample size of window ``i``."""
        return sum(self.n[p] for p in self.window_populations(i))


@dataclass(frozen=True)
class Dataset:
    """Per-population observation arrays matching a grouping scheme."""

    populations: tuple[np.ndarray, ...]

    @staticmethod
    def from_arrays(model: ModelSpec, scheme: GroupingScheme, arrays) -> "Dataset":
        pops = tuple(check_data(model, a) for a in arrays)
        if len(pops) != scheme.P:
            raise InputError(
                f"dataset has {len(pops)} populations, scheme expects {scheme.P}"
            )
        for p, (arr, expect) in enumerate(zip(pops, scheme.n)):
            if arr.shape[0] != expect:
                raise InputError(
                    f"population {p} has {arr.shape[0]} observations, "
                    f"scheme expects {expect}"
                )
        return Dataset(pops)

    def pooled(self, scheme: GroupingScheme, i: int) -> np.ndarray:
        """Window ``i`` observations, concatenated in population order."""
        parts = [self.populations[p] for p in scheme.window_populations(i)]
        return np.concatenate(parts, axis=0)


def overlap_correlation(scheme: GroupingScheme) -> np.ndarray:
    """Correlation matrix induced by window overlap (plug-in ratio).

    Exactly symmetric with unit diagonal, entries in [0, 1], and exact zeros
    for windows at least ``G`` apart.  For equal sample sizes the entries
    reduce to ``(G - |i-j|) / G``.
    """
    M, G, n = scheme.M, scheme.G, scheme.n
    w = [float(scheme.window_size(i)) for i in range(M)]
    r = np.zeros((M, M))
    for i in range(M):
        r[i, i] = 1.0
        for j in range(i + 1, min(i + G, M)):
            shared = float(sum(n[j : i + G]))
            r[i, j] = r[j, i] = shared / math.sqrt(w[i] * w[j])
    return r


@dataclass(frozen=True)
class WindowFit:
    """Both fits and the clamped statistic for one window."""

    unconstrained: FitResult
    constrained: FitResult
    n_pooled: int
    stat: float
    failed: bool


@dataclass(frozen=True)
class LRVectorResult:
    """Likelihood-ratio statistics for all windows.

    ``stats[i]`` is NaN when window ``i`` failed (a fit did not converge, or
    the constrained fit beat the unconstrained one by more than roundoff).
    """

    stats: np.ndarray
    windows: tuple[WindowFit, ...]

    @property
    def failed(self) -> np.ndarray:
        return np.array([w.failed for w in self.windows])


def _window_stat(
    model: ModelSpec,
    pooled: np.ndarray,
    hyp: HypothesisSpec,
    opts: SolverOptions,
) -> WindowFit:
    n_pooled = pooled.shape[0]
    fu, fc = fit_pair(model, pooled, hyp, opts=opts)
    stat = -2.0 * (fc.log_lik - fu.log_lik)
    tol_clamp = 1e-8 * (1.0 + n_pooled)
    failed = not (fu.converged and fc.converged)
    if math.isnan(stat):
        failed = True
    elif -tol_clamp < stat < 0.0:
        stat = 0.0
    elif stat < 0.0:
        # Constrained optimum above the unconstrained one beyond roundoff:
        # one of the fits missed its maximum.
        failed = True
    if failed:
        stat = math.nan
    return WindowFit(fu, fc, n_pooled, stat, failed)


def lr_vector(
    model: ModelSpec,
    data: Dataset,
    scheme: GroupingScheme,
    hyp: HypothesisSpec,
    opts: SolverOptions = SolverOptions(),
) -> LRVectorResult:
    """Per-window ``-2 log(lambda)`` statistics over the pooled windows.

    Window fits are independent; a failed window is marked rather than
    aborting the vector, so downstream studies can count and exclude it.
    Components are clamped at zero when roundoff produces a tiny negative
    value (within ``1e-8 * (1 + pooled size)``).
    """
    hyp.validate(model.d)
    if len(data.populations) != scheme.P:
        raise InputError(
            f"dataset has {len(data.populations)} populations, "
            f"scheme expects {scheme.P}"
        )
    fits = []
    stats = np.empty(scheme.M)
    for i in range(scheme.M):
        wf = _window_stat(model, data.pooled(scheme, i), hyp, opts)
        fits.append(wf)
        stats[i] = wf.stat
    return LRVectorResult(stats=stats, windows=tuple(fits))


def asymptotic_mle_covariance(
    model: ModelSpec,
    theta0,
    scheme: GroupingScheme,
    *,
    fisher: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Limiting covariance of the stacked scaled per-window MLE deviations.

    The deviation of window ``i`` is ``sqrt(W_i) * (theta_hat_i - theta0)``;
    the stacked vector of all windows is asymptotically centered Gaussian
    with block ``(i, j)`` equal to ``R[i, j] * inverse Fisher information``.
    """
    t0 = check_theta(model, theta0)
    if fisher is None:
        fisher = fisher_information(model, t0)
    inv_fisher = np.linalg.inv(fisher)
    inv_fisher = 0.5 * (inv_fisher + inv_fisher.T)
    return np.kron(overlap_correlation(scheme), inv_fisher)
