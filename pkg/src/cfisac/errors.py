"""Exception types shared across the package."""


class CfIsacError(Exception):
    """Base class for all package errors."""


class ConfigurationError(CfIsacError):
    """Invalid scenario or experiment configuration."""


class DomainError(CfIsacError):
    """Input outside the mathematical domain of an operation."""


class NumericalError(CfIsacError):
    """A numerical consistency check failed (non-PSD matrix, bad inversion, ...)."""


class DegenerateLinkError(CfIsacError):
    """A link carries no usable statistical energy (e.g. zero estimate covariance)."""
