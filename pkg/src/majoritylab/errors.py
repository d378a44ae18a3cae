"""Exception types shared across the package."""


class MajorityLabError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(MajorityLabError, ValueError):
    """A parameter is outside its documented domain."""


class UnsupportedOperationError(MajorityLabError):
    """The operation is not defined for this input (e.g. paths on non-trees)."""


class CapacityError(MajorityLabError):
    """Instance too large for an exact method."""


class StructuralError(MajorityLabError):
    """An internal consistency assumption was violated (engine bug)."""


class TruncationError(MajorityLabError):
    """A run hit its step cap before stabilizing.

    Carries the partial trace so callers can inspect what happened.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class IncompleteInputError(MajorityLabError):
    """A composite check was invoked without all required inputs."""


class ParseError(MajorityLabError):
    """A file could not be parsed; ``offset`` is the byte offset of the error."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset
