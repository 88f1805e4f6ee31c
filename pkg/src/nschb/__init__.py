"""Two-dimensional Navier-Stokes / Cahn-Hilliard / Boussinesq solver with a logarithmic potential."""

__version__ = "0.1.0"

from .config import SimConfig
from .errors import (CompatibilityError, DomainError, GridMismatchError, InvariantViolation, NonConvergenceError,
                     NSCHBError, RangeError)
from .fields import Grid, MACVectorField, ScalarField, TensorField
from .potential import CoefficientModel, PhysicalParams, PotentialParams, TanhCoefficient
from .state import SimState

__all__ = [
    "__version__", "SimConfig", "Grid", "ScalarField", "MACVectorField", "TensorField", "SimState",
    "PotentialParams", "CoefficientModel", "TanhCoefficient", "PhysicalParams",
    "NSCHBError", "DomainError", "RangeError", "CompatibilityError", "GridMismatchError",
    "NonConvergenceError", "InvariantViolation",
]
