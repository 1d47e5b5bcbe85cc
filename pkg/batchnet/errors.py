"""Exceptions raised by batchnet.

``ValidationError`` covers bad input (CLI exit status 1); ``ConsistencyError``
covers numerical results that contradict an invariant (CLI exit status 2).
"""


class BatchNetError(Exception):
    """Base class for all batchnet errors."""


class ValidationError(BatchNetError, ValueError):
    """The caller supplied something invalid."""


class ChannelError(ValidationError):
    """A channel matrix or channel parameter is invalid."""


class DimensionError(ValidationError):
    """Matrix or alphabet dimensions do not line up."""


class SizeBudgetExceeded(ValidationError):
    """An exact matrix would exceed the configured size budget."""


class RecodingError(ValidationError):
    """A recoder is undefined or breaks the emission structure."""


class BoundPreconditionError(ValidationError):
    """Parameters do not satisfy the preconditions of the requested bound."""


class DegenerateDecompositionError(ValidationError):
    """The bottleneck event has probability zero."""


class ConfigError(ValidationError):
    """A JSON configuration could not be parsed."""


class ConsistencyError(BatchNetError, ArithmeticError):
    """A computed quantity violates an invariant it must satisfy."""


class WitnessConflictError(ConsistencyError):
    """Pairing could not produce a collapse witness with the promised size."""
