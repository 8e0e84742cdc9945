"""Exception hierarchy shared across the package."""


class FedMIAError(Exception):
    """Base class for all package errors."""


class ConfigurationError(FedMIAError, ValueError):
    """A configuration or specification is invalid."""


class ShapeError(FedMIAError, ValueError):
    """Array shapes or parameter layouts do not line up."""


class DataError(FedMIAError, ValueError):
    """A dataset is empty, too small, or otherwise unusable."""


class DegenerateDataError(DataError):
    """Training labels contain a single class."""


class IngestionError(DataError):
    """A raw corpus file could not be parsed under its schema."""
