"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Inputs violate a documented precondition."""


class NumericalError(RuntimeError):
    """A numerical routine failed to meet its tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class InfeasibleError(NumericalError):
    """No admissible local polynomial exists for the supplied band."""
