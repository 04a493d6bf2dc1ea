"""Exceptions shared across modules."""


class MalformedInput(ValueError):
    """An input file could not be parsed; the message names the offending element or line."""


class MissingColumn(MalformedInput):
    pass


class WindowLengthZero(ValueError):
    pass


class BudgetExceeded(RuntimeError):
    pass


class Unreachable(RuntimeError):
    pass


class NoGoalFound(RuntimeError):
    pass


class GenerationFailed(RuntimeError):
    pass
