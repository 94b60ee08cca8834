"""Custom errors for the emergent-pde package."""


class EpdeError(Exception):
    """Base class for every error raised by emergent-pde."""


class TensorFormatError(EpdeError):
    """Raised when a tensor or model file has a bad header or is truncated."""


class ShapeMismatchError(EpdeError, ValueError):
    """Raised when array shapes, records or trees do not line up."""


class NumericalError(EpdeError):
    """Raised when a computation becomes unstable or produces non-finite values."""


class DegenerateInputError(NumericalError):
    """Raised when input carries no usable variation (zero distances, constant data)."""


class ConvergenceError(NumericalError):
    """Raised when an iterative solver fails to converge."""


class MissingInputError(EpdeError):
    """Raised when a pipeline stage cannot find an artifact it depends on."""


class ConfigError(EpdeError):
    """Raised when a configuration block is invalid for the requested stage."""
