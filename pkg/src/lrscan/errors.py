"""Exception types shared across the package."""


class LrscanError(Exception):
    """Base class for all package-specific errors."""


class InputError(LrscanError, ValueError):
    """Invalid user input: empty data, malformed files, shape mismatches."""


class DomainError(LrscanError, ValueError):
    """Parameter vector outside the model's parameter space."""


class ConfigError(LrscanError, ValueError):
    """Invalid or inconsistent run configuration."""


class NumericalError(LrscanError, RuntimeError):
    """A numerical guarantee failed (SPD check, factorization budget)."""


class StudyError(LrscanError, RuntimeError):
    """A simulation study could not produce a trustworthy report."""
