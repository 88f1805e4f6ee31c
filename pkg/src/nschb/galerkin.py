"""Velocity restricted to the span of the first ``m`` discrete Stokes eigenmodes.

Each mode is divergence-free and no-slip, so the pressure drops out of the
modal equations.  The nonlinear term is evaluated on the grid and projected
back, which keeps the cost per step at ``O(m N)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import operators as ops
from .elliptic import SolverConfig, stokes_eigenmodes
from .errors import NonConvergenceError
from .fields import Grid, MACVectorField, ScalarField
from .navier_stokes import buoyancy_force, capillary_force, viscosity_fields
from .potential import CoefficientModel, PhysicalParams, PotentialParams


@dataclass(frozen=True, eq=False)
class GalerkinBasis:
    """Orthonormal divergence-free basis ``w_1 .. w_m``.

    ``vectors`` holds interior face values, one column per mode, normalised
    so that ``<w_i, w_j> = delta_ij`` under the face quadrature.
    """

    grid: Grid
    eigenvalues: np.ndarray
    vectors: np.ndarray

    @classmethod
    def build(cls, grid: Grid, m: int, cfg: SolverConfig | None = None) -> "GalerkinBasis":
        modes = stokes_eigenmodes(grid, m, cfg or SolverConfig())
        return cls(grid, modes.eigenvalues, modes.vectors)

    @property
    def m(self) -> int:
        return len(self.eigenvalues)

    @property
    def modes(self) -> list[MACVectorField]:
        return [self.mode(i) for i in range(self.m)]

    def mode(self, i: int) -> MACVectorField:
        return MACVectorField.from_interior(self.grid, self.vectors[:, i])

    def truncate(self, m: int) -> "GalerkinBasis":
        """The first ``m`` modes; nested bases avoid ambiguity inside degenerate eigenspaces."""
        if not 1 <= m <= self.m:
            raise ValueError(f"cannot truncate {self.m} modes to {m}")
        return GalerkinBasis(self.grid, self.eigenvalues[:m], self.vectors[:, :m])

    def gram(self) -> np.ndarray:
        return self.grid.cell_volume * (self.vectors.T @ self.vectors)

    def coefficients(self, interior: np.ndarray) -> np.ndarray:
        return self.grid.cell_volume * (self.vectors.T @ interior)

    def synthesize(self, coeffs: np.ndarray) -> MACVectorField:
        return MACVectorField.from_interior(self.grid, self.vectors @ np.asarray(coeffs, dtype=float))


def galerkin_project(u: MACVectorField, basis: GalerkinBasis):
    """Coefficients ``g_i = <u, w_i>`` and the projection ``u_m = sum g_i w_i``."""
    if u.grid != basis.grid:
        raise ValueError("field and basis live on different grids")
    coeffs = basis.coefficients(u.interior())
    return coeffs, basis.synthesize(coeffs)


@dataclass(frozen=True)
class ModalForcing:
    """Fields frozen over one modal step; ``None`` entries are switched off."""

    theta: ScalarField | None = None
    phi: ScalarField | None = None
    extra: MACVectorField | None = None


def _modal_operators(basis: GalerkinBasis, theta: ScalarField | None, m: CoefficientModel):
    g = basis.grid
    if theta is None:
        theta = ScalarField.zeros(g, "dirichlet")
    nu_c, nu_n = viscosity_fields(theta, m)
    V = ops.viscous_matrix(g, nu_c, nu_n)
    return basis.grid.cell_volume * (basis.vectors.T @ (V @ basis.vectors))


def modal_forcing(basis: GalerkinBasis, forcing: ModalForcing, phys: PhysicalParams,
                  m: CoefficientModel, p: PotentialParams) -> np.ndarray:
    """``<f, w_j>`` for buoyancy, capillary and extra forces."""
    g = basis.grid
    total = np.zeros(basis.m)
    theta = forcing.theta if forcing.theta is not None else ScalarField.zeros(g, "dirichlet")
    if forcing.theta is not None:
        total += basis.coefficients(buoyancy_force(theta, phys).interior())
    if forcing.phi is not None:
        total += basis.coefficients(capillary_force(forcing.phi, theta, p, m).interior())
    if forcing.extra is not None:
        total += basis.coefficients(forcing.extra.interior())
    return total


def galerkin_ns_step(coeffs: np.ndarray, basis: GalerkinBasis, dt: float,
                     forcing: ModalForcing | None = None, phys: PhysicalParams | None = None,
                     m: CoefficientModel | None = None, p: PotentialParams | None = None,
                     advection: bool = True) -> np.ndarray:
    """One Heun (explicit RK2) step of the modal momentum system.

    ``d g_j / dt = -<N(u, u), w_j> + <div(2 nu D u), w_j> + <f, w_j>`` with
    ``u = sum g_i w_i``.  ``N`` is the skew-symmetric advection, so the
    nonlinear term does no work on ``u``.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    forcing = forcing or ModalForcing()
    phys = phys or PhysicalParams()
    m = m or CoefficientModel()
    p = p or PotentialParams()
    c0 = np.asarray(coeffs, dtype=float)
    Vm = _modal_operators(basis, forcing.theta, m)
    fm = modal_forcing(basis, forcing, phys, m, p)

    def rhs(c):
        out = Vm @ c + fm
        if advection and np.any(c):
            u = basis.synthesize(c)
            out -= basis.coefficients(ops.momentum_advection(u, u).interior())
        return out

    k1 = rhs(c0)
    k2 = rhs(c0 + dt * k1)
    c1 = c0 + 0.5 * dt * (k1 + k2)
    if not np.all(np.isfinite(c1)):
        raise NonConvergenceError("modal velocity overflowed; reduce dt", float("inf"), 1)
    return c1


def modal_energy(coeffs: np.ndarray) -> float:
    return 0.5 * float(np.dot(coeffs, coeffs))
