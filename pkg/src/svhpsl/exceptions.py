"""Exception types raised across the package."""


class BoundsViolationError(ValueError):
    """A decision vector or a box definition breaks the bounds contract."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class ProblemFormatError(ValueError):
    """A problem-spec or front file could not be parsed."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class UnknownProblemError(LookupError):
    pass


class UnsupportedMetricError(RuntimeError):
    pass


class NumericalFailureError(RuntimeError):
    pass


class CheckpointError(RuntimeError):
    pass
