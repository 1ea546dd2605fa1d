"""Exception taxonomy shared across the package."""


class CapacityError(ValueError):
    """Register or table size exceeds the desk-scale caps."""


class ShapeError(ValueError):
    """Dimension or length mismatch between operands."""


class ValidationError(ValueError):
    """Input violates a structural invariant (non-unitary matrix, bad config, ...)."""


class DomainError(ValueError):
    """Value outside the mathematical domain of an operation."""


class UnsupportedMethodError(ValueError):
    """Requested method is not applicable to the given object."""


class ConditioningError(ArithmeticError):
    """Linear solve failed or exceeded residual tolerance."""

    def __init__(self, msg: str, condition_estimate: float | None = None):
        super().__init__(msg)
        self.condition_estimate = condition_estimate


class DecompositionError(ArithmeticError):
    """Gate or matrix could not be decomposed within tolerance."""


class DegenerateModelError(ValueError):
    """Model has no usable content (e.g. all-zero coefficient vector)."""


class TrainingAbort(ArithmeticError):
    """Training hit a non-finite risk or gradient; carries the partial trace."""

    def __init__(self, msg: str, trace=None):
        super().__init__(msg)
        self.trace = trace
