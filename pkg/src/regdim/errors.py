"""Exception types raised by the estimators and simulators."""


class ArgumentError(ValueError):
    """An argument violates a documented precondition."""


class ToleranceError(ArithmeticError):
    """An exact oracle ran out of recursion budget before reaching its tolerance.

    ``achieved`` is the largest unresolved straddling mass at the point of failure.
    """

    def __init__(self, message: str, achieved: float):
        super().__init__(f"{message} (achieved accuracy {achieved:.3g})")
        self.achieved = achieved


class ResolutionError(ValueError):
    """A rectangle is too narrow for the path grid.

    ``min_n`` is the smallest power-of-two grid size that would pass the guard.
    """

    def __init__(self, message: str, min_n: int):
        super().__init__(f"{message}; need n >= {min_n}")
        self.min_n = min_n


class ConfigError(ArgumentError):
    """A configuration file or command-line value is invalid."""
