"""Exception hierarchy shared by all modules."""


class PggError(Exception):
    """Base class for every error raised by the package."""


class InvalidParams(PggError, ValueError):
    pass


class DomainError(PggError, ValueError):
    pass


class NoRoot(PggError):
    pass


class InternalError(PggError):
    pass


class FactorizationError(InternalError):
    pass


class StepFailure(PggError):
    pass


class BoundaryEscape(PggError):
    pass


class InsufficientData(PggError):
    pass


class InvalidSpec(PggError, ValueError):
    pass


class StepSizeError(PggError, ValueError):
    pass


class BoundsViolation(PggError):
    pass


class SolveFailure(PggError):
    pass


class LyapunovViolation(PggError):
    pass


class ParseError(PggError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class IoError(PggError, OSError):
    pass
