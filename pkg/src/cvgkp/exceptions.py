"""Exception types raised across the package."""


class CvgkpError(Exception):
    """Base class for all package errors."""


class InvalidStateError(CvgkpError, ValueError):
    """A state or operator does not satisfy its structural invariants."""


class InvalidParameterError(CvgkpError, ValueError):
    """A gate, channel or experiment parameter is out of its domain."""


class NumericalError(CvgkpError, ArithmeticError):
    """A computation produced a value that signals a corrupted input."""


class GridResolutionError(NumericalError):
    """A position grid cannot represent the requested state faithfully."""


class ConfigError(CvgkpError, ValueError):
    """An experiment configuration violates its schema."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key
