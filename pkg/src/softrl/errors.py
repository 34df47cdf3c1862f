"""Exception types shared across the package."""


class SoftrlError(Exception):
    """Base class for all package-specific errors."""


class DimensionError(SoftrlError, ValueError):
    """Array shapes do not line up with the MDP they are meant for."""


class ParameterError(SoftrlError, ValueError):
    """A scalar parameter is outside its admissible range."""


class ConvergenceError(SoftrlError, RuntimeError):
    """An iterative solve failed to reach its tolerance.

    Carries the sup-norm residual of the last sweep so callers can decide
    whether to retry with a looser tolerance or a larger budget.
    """

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


class EnumerationBudgetError(SoftrlError, RuntimeError):
    """Exhaustive trajectory enumeration would exceed the path budget."""


class DegenerateDistributionError(SoftrlError, ValueError):
    """A policy row has no support (all probabilities zero)."""


class ContractError(SoftrlError, RuntimeError):
    """A caller violated an operation's precondition (e.g. selecting from
    a tree node that is not fully expanded)."""


class TrainingDivergenceError(SoftrlError, RuntimeError):
    """Policy parameters became non-finite during training."""

    def __init__(self, message: str, iteration: int):
        super().__init__(message)
        self.iteration = iteration


class ConfigError(SoftrlError, ValueError):
    """An experiment configuration is invalid.

    ``violations`` lists every offending key so users can fix the whole
    file in one pass.
    """

    def __init__(self, violations: list[str]):
        super().__init__("invalid configuration: " + "; ".join(violations))
        self.violations = list(violations)


class CheckpointError(SoftrlError, ValueError):
    """A checkpoint file could not be parsed.

    ``offset`` is the byte offset of the first unparseable character when
    known, else -1.
    """

    def __init__(self, message: str, offset: int = -1):
        super().__init__(message)
        self.offset = offset
