"""Temperature step with temperature-dependent conductivity."""

from __future__ import annotations

import warnings

import numpy as np
from scipy.integrate import quad_vec

from . import operators as ops
from .elliptic import SolverConfig, implicit_diffusion_solve
from .fields import DIRICHLET, MACVectorField, ScalarField
from .potential import CoefficientModel

THETA_SOLVER = SolverConfig(rel_tol=1e-14, max_iter=500)


def face_conductivity(theta: ScalarField, m: CoefficientModel):
    """``kappa`` evaluated at face-averaged temperatures (wall faces use the ghost average 0)."""
    tx = ops.cell_to_xface(theta.values, theta.bc)
    ty = ops.cell_to_yface(theta.values, theta.bc)
    return m.kappa(tx), m.kappa(ty)


def cfl_number(u: MACVectorField, dt: float) -> float:
    g = u.grid
    return dt * (np.max(np.abs(u.ux)) / g.dx + np.max(np.abs(u.uy)) / g.dy)


def theta_step(theta_n: ScalarField, u_n: MACVectorField | None, m: CoefficientModel, dt: float,
               scheme: str = ops.UPWIND, cfg: SolverConfig = THETA_SOLVER,
               source: np.ndarray | None = None) -> ScalarField:
    """Linearly implicit step for ``theta_t + u . grad theta = div(kappa(theta) grad theta)``.

    Solves ``(I - dt div(kappa(theta_n) grad)) theta+ = theta_n - dt div(u theta_n)``
    with ``theta = 0`` on the wall.  With upwind fluxes, a CFL number of at
    most one and a divergence-free ``u`` the right-hand side is a convex
    combination of old values and the matrix is an M-matrix, so
    ``max|theta+| <= max|theta_n|``.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if theta_n.bc != DIRICHLET:
        raise ValueError("theta must carry the Dirichlet boundary condition")
    m.check_range(theta_n.values)
    rhs = theta_n.values.copy()
    if u_n is not None and u_n.max_abs() > 0.0:
        if scheme == ops.UPWIND and cfl_number(u_n, dt) > 1.0:
            warnings.warn("CFL number above 1: upwind step is no longer monotone", RuntimeWarning, stacklevel=2)
        rhs += dt * ops.advect(theta_n, u_n, scheme).values
    if source is not None:
        rhs += dt * np.asarray(source, dtype=float)
    kx, ky = face_conductivity(theta_n, m)
    out = implicit_diffusion_solve(theta_n.grid, rhs, kx, ky, dt, cfg, DIRICHLET)
    return ScalarField(theta_n.grid, out, DIRICHLET)


def kirchhoff_transform(theta: ScalarField, m: CoefficientModel, epsabs: float = 1e-13) -> ScalarField:
    """``Theta = int_0^theta kappa(s) ds`` cellwise, by adaptive quadrature.

    Uses the substitution ``s = t theta`` so one vector-valued integral over
    ``t in [0, 1]`` covers every cell.
    """
    th = theta.values
    if not np.all(np.isfinite(m.kappa(th))):
        raise ValueError("conductivity is not finite on the temperature range")
    val, err = quad_vec(lambda t: th * m.kappa(t * th), 0.0, 1.0, epsabs=epsabs, epsrel=1e-13)
    if not np.all(np.isfinite(val)):
        raise ArithmeticError("Kirchhoff quadrature produced non-finite values")
    return ScalarField(theta.grid, val, theta.bc)
