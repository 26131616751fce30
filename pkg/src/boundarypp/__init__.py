"""Simulation and numerical checks for regression with jump-discontinuous
errors and the matching boundary Poisson point process experiment."""

__version__ = "0.1.0"

from . import _kernels  # noqa: E402
from .errors import InfeasibleError, NumericalError, ValidationError  # noqa: E402

BACKEND = _kernels.BACKEND

__all__ = ["BACKEND", "InfeasibleError", "NumericalError", "ValidationError", "__version__"]
