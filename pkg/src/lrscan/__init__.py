"""Hypothesis testing with vectors of likelihood ratios over overlapping windows.

Data from consecutive populations are pooled into overlapping groups; each
group yields a likelihood-ratio statistic, and the vector of statistics is
dependent because neighboring groups share samples.  This package provides
the model families, constrained/unconstrained MLEs, the overlap-correlation
matrix, the correlated chi-square limit law of the statistic vector (with
sampling and joint tail probabilities), and a Monte Carlo harness plus CLI
for verifying the asymptotics at finite sample sizes.
"""

from ._kernels import BACKEND_NAME
from .errors import (
    ConfigError,
    DomainError,
    InputError,
    LrscanError,
    NumericalError,
    StudyError,
)
from .limitdist import (
    LimitLaw,
    LimitSampleBatch,
    chi_square_quantile,
    chi_square_survival,
    joint_exceedance,
    psd_repair_cholesky,
    q_covariance,
    sample_limit_law,
)
from .mle import (
    FitResult,
    HypothesisSpec,
    SolverOptions,
    fit_constrained,
    fit_unconstrained,
)
from .models import (
    ModelSpec,
    RegularityReport,
    build_model,
    check_regularity,
    fisher_information,
    gaussian_mean,
    gaussian_mean_log_sd,
    log_likelihood,
    poisson_log_rate,
)
from .simharness import (
    ReplicateResult,
    StudyConfig,
    StudyReport,
    ks_statistic,
    run_replicate,
    run_study,
)
from .windows import (
    Dataset,
    GroupingScheme,
    LRVectorResult,
    asymptotic_mle_covariance,
    lr_vector,
    overlap_correlation,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND_NAME",
    "ConfigError",
    "Dataset",
    "DomainError",
    "FitResult",
    "GroupingScheme",
    "HypothesisSpec",
    "InputError",
    "LRVectorResult",
    "LimitLaw",
    "LimitSampleBatch",
    "LrscanError",
    "ModelSpec",
    "NumericalError",
    "RegularityReport",
    "ReplicateResult",
    "SolverOptions",
    "StudyConfig",
    "StudyError",
    "StudyReport",
    "__version__",
    "asymptotic_mle_covariance",
    "build_model",
    "check_regularity",
    "chi_square_quantile",
    "chi_square_survival",
    "fisher_information",
    "fit_constrained",
    "fit_unconstrained",
    "gaussian_mean",
    "gaussian_mean_log_sd",
    "joint_exceedance",
    "ks_statistic",
    "log_likelihood",
    "lr_vector",
    "overlap_correlation",
    "poisson_log_rate",
    "psd_repair_cholesky",
    "q_covariance",
    "run_replicate",
    "run_study",
    "sample_limit_law",
]
