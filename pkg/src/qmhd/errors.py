"""Exception and warning types shared across the package."""


class QMHDError(Exception):
    """Base class for all package errors."""


class NonpositiveDensity(QMHDError):
    """Density must be strictly positive for constitutive evaluations."""


class DensityFloorViolation(QMHDError):
    """Density dropped below the configured floor."""


class MaximumPrincipleViolation(QMHDError):
    """Density left the advection-diffusion corridor; the time step is too large."""


class PicardDivergence(QMHDError):
    """Fixed-point iteration failed to contract; halve the time step and retry."""


class SingularMass(QMHDError):
    """Density-weighted Gram matrix is not positive definite."""


class NonuniformSampling(QMHDError):
    """Trajectory window is not uniformly sampled in time."""


class SnapshotFormatError(QMHDError):
    """Snapshot file is malformed or unsupported."""


class UsageError(QMHDError):
    """Command line invoked with inconsistent arguments."""


class ConfigError(QMHDError):
    """Base class for configuration problems."""


class ParseError(ConfigError):
    """Syntax error or unknown key in a config file."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line
        self.message = message


class ValidationError(ConfigError):
    """A configured value violates a documented constraint."""

    def __init__(self, field: str, constraint: str, line: int | None = None):
        suffix = f" (line {line})" if line is not None else ""
        super().__init__(f"{field}: {constraint}{suffix}")
        self.field = field
        self.constraint = constraint
        self.line = line


class SpectralTailWarning(UserWarning):
    """Top third of the spectrum carries a non-negligible share of the result."""
