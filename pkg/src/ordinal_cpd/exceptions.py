"""Exception hierarchy shared by every module of the package."""


class OrdinalCPDError(Exception):
    """Base class for all errors raised by ordinal_cpd."""


class InvalidInputError(OrdinalCPDError, ValueError):
    """Raised when data handed to an operation violates its preconditions."""


class ConfigurationError(OrdinalCPDError, ValueError):
    """Raised for invalid model, experiment or command configuration."""


class DegenerateInputError(InvalidInputError):
    """Raised when the data carry no variability the test can normalize by."""
