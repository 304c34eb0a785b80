"""Exception taxonomy shared by the model, stability, simulation and CLI layers."""

from typing import Optional


class QsmeError(Exception):
    """Base class for every error raised by this package."""


class ModelValidationError(QsmeError, ValueError):
    """A model file or in-memory model violates one of its invariants."""


class DimensionMismatchError(QsmeError, ValueError):
    pass


class ChannelKindError(QsmeError, ValueError):
    """Operation requested on a channel of the wrong kind (or bad index)."""


class StabilityPreconditionError(QsmeError):
    """A stability quantity was requested outside its domain of definition."""


class CertificateNotFoundError(QsmeError):
    pass


class InsufficientDataError(QsmeError, ValueError):
    pass


class NumericalFailure(QsmeError):
    """Fatal numeric event; `time` is the simulation time where it happened."""

    def __init__(self, message: str, time: Optional[float] = None):
        self.time = time
        if time is not None:
            message = f"{message} (t={time:.6g})"
        super().__init__(message)
