"""Exception and warning types shared across the package."""


class ParameterError(ValueError):
    """Invalid distribution or bound parameter."""


class DomainError(ValueError):
    """Quantity requested outside the domain where it is finite."""


class ShapeError(ValueError):
    """Incompatible matrix or vector shapes."""


class PreconditionError(ValueError):
    pass


class CostGuardError(ValueError):
    pass


class ConfigError(ValueError):
    pass


class ContractError(ValueError):
    pass


class InsufficientDataError(ValueError):
    pass


class NoSolutionError(RuntimeError):
    pass


class NoDominationError(RuntimeError):
    pass


class ConstructionError(RuntimeError):
    pass


class ConvergenceWarning(RuntimeWarning):
    """Power iteration hit its cap; ``estimate`` holds the best value seen."""

    def __init__(self, message, estimate=float("nan")):
        super().__init__(message)
        self.estimate = estimate
