"""Exception types. Every error carries a machine-readable ``code``."""


class NoisecoolError(Exception):
    code = "ERROR"

    def __init__(self, message, code=None):
        super().__init__(message)
        if code is not None:
            self.code = code


class InvalidArgument(NoisecoolError, ValueError):
    code = "INVALID_ARGUMENT"


class Diverged(NoisecoolError, ArithmeticError):
    """Integration produced a non-finite state."""

    code = "DIVERGED"

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class UnderResolved(NoisecoolError):
    code = "UNDER_RESOLVED"


class AmbiguousPeak(NoisecoolError):
    code = "AMBIGUOUS_PEAK"


class NormalizationFault(NoisecoolError):
    code = "NORMALIZATION_FAULT"


class EmptyTable(NoisecoolError):
    code = "EMPTY_TABLE"
