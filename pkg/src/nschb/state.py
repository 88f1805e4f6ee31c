"""The simulation state at one time level."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import GridMismatchError
from .fields import DIRICHLET, NEUMANN, Grid, MACVectorField, ScalarField


@dataclass(frozen=True, eq=False)
class SimState:
    """``(t, u, p, phi, mu, theta)``; ``theta`` is Dirichlet, the rest Neumann."""

    t: float
    u: MACVectorField
    p: ScalarField
    phi: ScalarField
    mu: ScalarField
    theta: ScalarField

    def __post_init__(self):
        g = self.u.grid
        for f in (self.p, self.phi, self.mu, self.theta):
            if f.grid != g:
                raise GridMismatchError("state fields live on different grids")
        if self.theta.bc != DIRICHLET:
            raise ValueError("theta must carry the Dirichlet boundary condition")

    @property
    def grid(self) -> Grid:
        return self.u.grid

    @classmethod
    def zeros(cls, grid: Grid, t: float = 0.0) -> "SimState":
        return cls(
            t,
            MACVectorField.zeros(grid),
            ScalarField.zeros(grid, NEUMANN),
            ScalarField.zeros(grid, NEUMANN),
            ScalarField.zeros(grid, NEUMANN),
            ScalarField.zeros(grid, DIRICHLET),
        )

    def replace(self, **kw) -> "SimState":
        return replace(self, **kw)

    def is_finite(self) -> bool:
        return self.u.is_finite() and all(
            bool(np.all(np.isfinite(f.values))) for f in (self.p, self.phi, self.mu, self.theta)
        )
