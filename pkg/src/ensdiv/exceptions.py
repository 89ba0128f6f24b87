"""Exception and warning classes raised by ensdiv."""


class EnsdivError(Exception):
    """Base class for all library errors."""


class InvalidDimensionError(EnsdivError, ValueError):
    pass


class ShapeError(EnsdivError, ValueError):
    pass


class InsufficientNeighborsError(EnsdivError, ValueError):
    pass


class DomainError(EnsdivError, ValueError):
    pass


class ParameterError(EnsdivError, ValueError):
    pass


class ConfigurationError(EnsdivError, ValueError):
    pass


class NumericError(EnsdivError, ArithmeticError):
    """A non-finite value survived clamping.

    ``index`` holds the offending evaluation point, when known.
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class DegenerateBasisError(EnsdivError, ValueError):
    pass


class InfeasibleBudgetError(EnsdivError, ValueError):
    pass


class DegenerateTrialsError(EnsdivError, ValueError):
    pass


class EstimatorFailureError(EnsdivError, RuntimeError):
    pass


class PathologicalSpecError(EnsdivError, ValueError):
    pass


class ModelError(EnsdivError, ValueError):
    pass


class DegenerateGeometryWarning(UserWarning):
    """A k-NN radius fell below the floor and was clamped."""
