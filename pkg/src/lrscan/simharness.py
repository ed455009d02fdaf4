"""Monte Carlo verification of the asymptotic laws at desk scale.

A study simulates datasets at a fixed true parameter, computes per-window
MLEs and likelihood-ratio statistics for every replicate, and compares the
empirical behavior against the asymptotic predictions:

* each window's statistic against its chi-square marginal (KS test);
* the empirical covariance of the statistic vector against
  ``2 r R^2`` (with delta-method Monte Carlo error bars);
* the empirical covariance of the stacked scaled MLE deviations
  ``sqrt(W_i) (theta_hat_i - theta0)`` against the block matrix
  ``R[i,j] * inverse Fisher information``;
* empirical joint exceedance frequencies against seeded Monte Carlo
  estimates under the limit law.

Replicates draw their data from per-replicate substreams, so a study is
deterministic given its config, including across thread counts.  Replicates
whose fits fail are excluded, with a hard 5% budget: beyond that the study
raises instead of reporting biased results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from joblib import Parallel, delayed

from .errors import ConfigError, InputError, StudyError
from .limitdist import (
    LimitLaw,
    chi_square_quantile,
    chi_square_survival,
    joint_exceedance,
    q_covariance,
)
from .mle import HypothesisSpec, SolverOptions, fit_unconstrained
from .models import ModelSpec, check_theta, fisher_information
from .rng import PURPOSE_DATA, SubstreamFactory
from .windows import (
    Dataset,
    GroupingScheme,
    asymptotic_mle_covariance,
    lr_vector,
    overlap_correlation,
)

DEFAULT_THRESHOLD_LEVELS = (0.9, 0.95)
MAX_FAILURE_RATE = 0.05


@dataclass(frozen=True)
class StudyConfig:
    """Configuration of one simulation study.

    ``kind`` selects what the study verifies: ``"lr"`` runs the full
    likelihood-ratio pipeline and requires the true parameter to lie in the
    null subspace (leading ``r`` coordinates zero); ``"mle"`` checks only the
    covariance of scaled MLE deviations and accepts any true parameter.
    ``thresholds`` holds explicit per-window threshold vectors for the joint
    exceedance comparison; when ``None``, the marginal chi-square quantiles
    at the default levels (0.9, 0.95) are used for every window.
    """

    model: ModelSpec
    theta0: np.ndarray
    scheme: GroupingScheme
    hyp: HypothesisSpec
    replicates: int
    seed: int
    limit_law_draws: int = 100_000
    thresholds: Optional[tuple[tuple[float, ...], ...]] = None
    kind: str = "lr"

    def __post_init__(self):
        object.__setattr__(
            self, "theta0", check_theta(self.model, self.theta0)
        )
        self.hyp.validate(self.model.d)
        if self.replicates < 100:
            raise ConfigError(
                f"replicates must be >= 100, got {self.replicates}"
            )
        if self.kind not in ("lr", "mle"):
            raise ConfigError(f"study kind must be 'lr' or 'mle', got {self.kind!r}")
        if self.kind == "lr" and np.any(self.theta0[: self.hyp.r] != 0.0):
            raise ConfigError(
                "an 'lr' study simulates under the null: the first r "
                "coordinates of theta0 must be zero"
            )
        if self.limit_law_draws < 1000:
            raise ConfigError(
                f"limit_law_draws must be >= 1000, got {self.limit_law_draws}"
            )
        if self.thresholds is not None:
            t = tuple(tuple(float(v) for v in row) for row in self.thresholds)
            for row in t:
                if len(row) != self.scheme.M:
                    raise ConfigError(
                        f"each threshold vector must have {self.scheme.M} entries"
                    )
                if any(v < 0.0 or not math.isfinite(v) for v in row):
                    raise ConfigError("thresholds must be finite and >= 0")
            object.__setattr__(self, "thresholds", t)

    def threshold_vectors(self) -> tuple[tuple[float, ...], ...]:
        if self.thresholds is not None:
            return self.thresholds
        rows = []
        for level in DEFAULT_THRESHOLD_LEVELS:
            q = chi_square_quantile(self.hyp.r, level)
            rows.append(tuple([q] * self.scheme.M))
        return tuple(rows)


@dataclass(frozen=True)
class ReplicateResult:
    """Per-replicate window statistics and scaled MLE deviations."""

    stats: np.ndarray  # (M,), NaN-filled for 'mle' studies or failures
    deviations: np.ndarray  # (M, d): sqrt(W_i) * (theta_hat_i - theta0)
    failed: bool


def _simulate_dataset(
    config: StudyConfig, gen: np.random.Generator
) -> Dataset:
    pops = tuple(
        config.model.sampler(config.theta0, n_p, gen) for n_p in config.scheme.n
    )
    return Dataset(pops)


def _replicate(config: StudyConfig, index: int, streams: SubstreamFactory) -> ReplicateResult:
    gen = streams.get(PURPOSE_DATA, index)
    data = _simulate_dataset(config, gen)
    scheme = config.scheme
    M, d = scheme.M, config.model.d
    deviations = np.full((M, d), np.nan)
    stats = np.full(M, np.nan)
    failed = False
    if config.kind == "lr":
        res = lr_vector(config.model, data, scheme, config.hyp)
        stats = res.stats
        failed = bool(res.failed.any())
        for i, wf in enumerate(res.windows):
            if not wf.unconstrained.converged:
                continue
            scale = math.sqrt(scheme.window_size(i))
            deviations[i] = scale * (wf.unconstrained.theta_hat - config.theta0)
    else:
        for i in range(M):
            fit = fit_unconstrained(config.model, data.pooled(scheme, i))
            if not fit.converged:
                failed = True
                continue
            scale = math.sqrt(scheme.window_size(i))
            deviations[i] = scale * (fit.theta_hat - config.theta0)
    if np.any(np.isnan(deviations)):
        failed = True
    return ReplicateResult(stats=stats, deviations=deviations, failed=failed)


def run_replicate(config: StudyConfig, index: int) -> ReplicateResult:
    """Run one replicate; deterministic given (config, index)."""
    if not 0 <= index < config.replicates:
        raise InputError(
            f"replicate index {index} out of range 0..{config.replicates - 1}"
        )
    return _replicate(config, index, SubstreamFactory(config.seed))


def ks_statistic(samples, cdf: Callable) -> tuple[float, float]:
    """One-sample Kolmogorov-Smirnov statistic and asymptotic p-value.

    ``cdf`` may be scalar or vectorized; it is evaluated at the sorted
    sample.  The p-value uses the asymptotic Kolmogorov series truncated at
    absolute error 1e-8.
    """
    x = np.sort(np.asarray(samples, dtype=np.float64))
    n = x.size
    if n == 0:
        raise InputError("KS test requires at least one sample")
    f = np.asarray(cdf(x), dtype=np.float64)
    if f.shape != x.shape:
        f = np.array([float(cdf(v)) for v in x])
    grid = np.arange(1, n + 1) / n
    d_plus = float(np.max(grid - f))
    d_minus = float(np.max(f - (grid - 1.0 / n)))
    stat = max(d_plus, d_minus)
    return stat, _kolmogorov_sf(math.sqrt(n) * stat)


def _kolmogorov_sf(lam: float) -> float:
    # 2 * sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lam^2), truncated at 1e-8 absolute.
    if lam <= 0.0:
        return 1.0
    total = 0.0
    sign = 1.0
    for k in range(1, 100_000):
        term = math.exp(-2.0 * k * k * lam * lam)
        total += sign * term
        if term < 1e-9:
            break
        sign = -sign
    return min(1.0, max(0.0, 2.0 * total))


def _delta_method_sigma(centered_i, centered_j, cov_ij: float, n: int) -> float:
    # Standard error of a sample covariance entry from fourth moments.
    m22 = float(np.mean(centered_i**2 * centered_j**2))
    return math.sqrt(max(m22 - cov_ij**2, 0.0) / n)


@dataclass(frozen=True)
class CovarianceCheck:
    """Empirical vs. theoretical covariance with per-entry error bars."""

    empirical: np.ndarray
    theoretical: np.ndarray
    sigma: np.ndarray  # Monte Carlo standard error per entry
    max_sigma_dev: float

    def to_dict(self) -> dict:
        return {
            "empirical": self.empirical.tolist(),
            "theoretical": self.theoretical.tolist(),
            "mc_sigma": self.sigma.tolist(),
            "max_sigma_dev": self.max_sigma_dev,
        }


def _covariance_check(samples: np.ndarray, theoretical: np.ndarray) -> CovarianceCheck:
    n, k = samples.shape
    centered = samples - samples.mean(axis=0)
    emp = (centered.T @ centered) / (n - 1)
    sigma = np.empty((k, k))
    dev = np.empty((k, k))
    for i in range(k):
        for j in range(k):
            s = _delta_method_sigma(centered[:, i], centered[:, j], emp[i, j], n)
            sigma[i, j] = s
            dev[i, j] = abs(emp[i, j] - theoretical[i, j]) / max(s, 1e-300)
    return CovarianceCheck(
        empirical=emp,
        theoretical=theoretical,
        sigma=sigma,
        max_sigma_dev=float(dev.max()),
    )


@dataclass(frozen=True)
class ExceedanceCheck:
    """Replicate joint tail frequency vs. limit-law Monte Carlo estimate."""

    thresholds: tuple[float, ...]
    empirical: float
    empirical_se: float
    limit: float
    limit_se: float
    sigma_dev: float

    def to_dict(self) -> dict:
        return {
            "thresholds": list(self.thresholds),
            "empirical": self.empirical,
            "empirical_se": self.empirical_se,
            "limit": self.limit,
            "limit_se": self.limit_se,
            "sigma_dev": self.sigma_dev,
        }


@dataclass(frozen=True)
class StudyReport:
    """Aggregated study output; all matrices are row-major nested lists."""

    replicates: int
    failures: int
    ks_stats: Optional[tuple[float, ...]]
    ks_p_values: Optional[tuple[float, ...]]
    q_cov: Optional[CovarianceCheck]
    mle_cov: CovarianceCheck
    exceedance: Optional[tuple[ExceedanceCheck, ...]]

    def to_dict(self) -> dict:
        out: dict = {
            "replicates": self.replicates,
            "failures": self.failures,
            "mle_cov": self.mle_cov.to_dict(),
        }
        if self.ks_stats is not None:
            out["windows"] = [
                {"window": i + 1, "ks_stat": s, "ks_p": p}
                for i, (s, p) in enumerate(zip(self.ks_stats, self.ks_p_values))
            ]
        if self.q_cov is not None:
            out["q_cov"] = self.q_cov.to_dict()
        if self.exceedance is not None:
            out["joint_exceedance"] = [e.to_dict() for e in self.exceedance]
        return out


def _run_replicate_range(config, lo, hi):
    streams = SubstreamFactory(config.seed)
    M, d = config.scheme.M, config.model.d
    stats = np.empty((hi - lo, M))
    devs = np.empty((hi - lo, M * d))
    failed = np.empty(hi - lo, dtype=bool)
    for idx in range(lo, hi):
        res = _replicate(config, idx, streams)
        stats[idx - lo] = res.stats
        devs[idx - lo] = res.deviations.reshape(-1)
        failed[idx - lo] = res.failed
    return stats, devs, failed


def run_study(config: StudyConfig, *, threads: int = 1) -> StudyReport:
    """Run all replicates and compare against the asymptotic laws.

    Deterministic given ``config`` for any ``threads`` value: every
    replicate's randomness comes from its own index-addressed substream, so
    the per-replicate arrays are identical however the replicate ranges are
    scheduled.  ``threads > 1`` distributes contiguous ranges over worker
    processes (the replicate loop is Python-bound, so OS threads would not
    help); results are concatenated in range order.
    """
    n_rep = config.replicates
    threads = max(1, int(threads))
    if threads == 1:
        stats, devs, failed = _run_replicate_range(config, 0, n_rep)
    else:
        bounds = np.linspace(0, n_rep, threads + 1).astype(int)
        parts = Parallel(n_jobs=threads)(
            delayed(_run_replicate_range)(config, int(lo), int(hi))
            for lo, hi in zip(bounds[:-1], bounds[1:])
            if hi > lo
        )
        stats = np.concatenate([p[0] for p in parts])
        devs = np.concatenate([p[1] for p in parts])
        failed = np.concatenate([p[2] for p in parts])

    n_failed = int(failed.sum())
    if n_failed > MAX_FAILURE_RATE * n_rep:
        raise StudyError(
            f"{n_failed}/{n_rep} replicates failed, exceeding the "
            f"{MAX_FAILURE_RATE:.0%} budget"
        )
    ok = ~failed
    M = config.scheme.M

    fisher = fisher_information(config.model, config.theta0)
    mle_theory = asymptotic_mle_covariance(
        config.model, config.theta0, config.scheme, fisher=fisher
    )
    mle_check = _covariance_check(devs[ok], mle_theory)

    if config.kind != "lr":
        return StudyReport(
            replicates=n_rep,
            failures=n_failed,
            ks_stats=None,
            ks_p_values=None,
            q_cov=None,
            mle_cov=mle_check,
            exceedance=None,
        )

    r = config.hyp.r
    law = LimitLaw(r=r, R=overlap_correlation(config.scheme))

    def chi2_cdf(values):
        return np.array([1.0 - chi_square_survival(r, v) for v in values])

    ks_stats = []
    ks_ps = []
    for i in range(M):
        stat, p = ks_statistic(stats[ok, i], chi2_cdf)
        ks_stats.append(stat)
        ks_ps.append(p)

    q_check = _covariance_check(stats[ok], q_covariance(law))

    n_ok = int(ok.sum())
    exceed = []
    for t_row in config.threshold_vectors():
        t = np.asarray(t_row)
        emp = float(np.mean(np.all(stats[ok] > t, axis=1)))
        emp_se = math.sqrt(emp * (1.0 - emp) / n_ok)
        lim, lim_se = joint_exceedance(
            law, t, config.limit_law_draws, config.seed
        )
        combined = math.sqrt(emp_se**2 + lim_se**2)
        exceed.append(
            ExceedanceCheck(
                thresholds=tuple(float(v) for v in t_row),
                empirical=emp,
                empirical_se=emp_se,
                limit=lim,
                limit_se=lim_se,
                sigma_dev=abs(emp - lim) / max(combined, 1e-300),
            )
        )

    return StudyReport(
        replicates=n_rep,
        failures=n_failed,
        ks_stats=tuple(ks_stats),
        ks_p_values=tuple(ks_ps),
        q_cov=q_check,
        mle_cov=mle_check,
        exceedance=tuple(exceed),
    )
