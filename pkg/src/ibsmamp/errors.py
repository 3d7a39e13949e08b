"""Shared exception types."""


class ConfigurationError(ValueError):
    """A requested configuration is inconsistent or out of contract."""


class MaterializationLimitError(ValueError):
    """Dense materialization refused because the operator exceeds the size cap."""


class NormalizationError(ArithmeticError):
    """An orthogonalization normalizer degenerated below working precision."""


class UnsupportedMetricError(ConfigurationError):
    """A metric was requested for a source prior that cannot produce it."""
