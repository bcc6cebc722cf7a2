"""Exception hierarchy shared by every module."""


class NexlimError(Exception):
    """Base class for library errors."""


class ArgumentError(NexlimError, ValueError):
    """A precondition on an argument was violated."""


class CapabilityError(NexlimError):
    """The request is valid but outside what this implementation supports."""


class DivergenceError(NexlimError, ArithmeticError):
    """The integrated state became non-finite."""


class SeparationError(NexlimError):
    """Two opinions came closer than the gap floor under singular dynamics."""

    def __init__(self, message, t=None, gap=None):
        super().__init__(message)
        self.t = t
        self.gap = gap


class ConfigError(NexlimError):
    """A scenario configuration could not be parsed or validated."""
