"""Exception types shared across the package."""


class MaxEVError(Exception):
    """Base class for all errors raised by maxev."""


class DomainError(MaxEVError, ValueError):
    """An input lies outside the domain of an operation."""


class ConfigurationError(MaxEVError, ValueError):
    """A scenario or estimator configuration cannot be executed."""


class EnumerationCapError(DomainError):
    """An exact enumeration would exceed the outcome cap."""
