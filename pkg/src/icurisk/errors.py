"""Exception types shared across the toolkit."""


class IcuRiskError(Exception):
    """Base class for all toolkit errors."""


class CohortFormatError(IcuRiskError):
    """Cohort file does not match the expected CSV layout or schema."""


class CohortValidationError(IcuRiskError):
    """A cell value violates the feature schema."""

    def __init__(self, message: str, row: int | None = None, feature: str | None = None):
        super().__init__(message)
        self.row = row
        self.feature = feature


class CalibrationError(IcuRiskError):
    """Prevalence calibration did not converge."""


class DegenerateFitError(IcuRiskError):
    """Not enough usable data to fit a regression."""


class DomainError(IcuRiskError):
    """Input outside the mathematical domain of a formula."""


class MissingValueError(IcuRiskError):
    """A missing value survived into a stage that requires complete data."""


class ColumnMismatchError(IcuRiskError):
    """Matrix columns do not match the fitted state they are used with."""


class ConfigError(IcuRiskError):
    """Invalid configuration value."""


class DivergenceError(IcuRiskError):
    """Optimization produced a non-finite loss."""


class UndefinedMetricError(IcuRiskError):
    """Metric is undefined for the given labels (e.g. single-class AUC)."""


class ArtifactError(IcuRiskError):
    """Model artifact file is corrupt, truncated, or of an unknown version."""
