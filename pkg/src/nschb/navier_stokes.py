"""Momentum step: variable viscosity, capillary and buoyancy forcing, projection."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import operators as ops
from .elliptic import SolverConfig, solve_spd, transform_solve, velocity_transform_solve
from .fields import NEUMANN, MACVectorField, ScalarField, TensorField
from .potential import W, CoefficientModel, PhysicalParams, PotentialParams, eval_potential
from .state import SimState

SEMI_IMPLICIT = "semi_implicit"
EXPLICIT = "explicit"


@dataclass(frozen=True)
class NSStepConfig:
    """Momentum-step settings.

    ``advection`` switches the convective term off for Stokes-limit runs.
    """

    dt: float
    viscous_treatment: str = SEMI_IMPLICIT
    linear: SolverConfig = field(default_factory=lambda: SolverConfig(rel_tol=1e-12, max_iter=500))
    advection: bool = True

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.viscous_treatment not in (SEMI_IMPLICIT, EXPLICIT):
            raise ValueError(f"unknown viscous treatment {self.viscous_treatment!r}")


def capillary_stress(phi: ScalarField, theta: ScalarField, p: PotentialParams, m: CoefficientModel) -> TensorField:
    """``sigma = lam (grad phi x grad phi) + lam (|grad phi|^2 / 2 + W) I``.

    Diagonal entries sit at cells (squared face gradients averaged onto the
    cell), the shear entry at nodes (face gradients averaged onto the node).
    Shear vanishes on wall nodes, where one of the two gradients does.
    """
    g = phi.grid
    go = ops.grad_outer(phi)
    lam_c = m.lam(theta.values)
    iso = 0.5 * (go.xx + go.yy) + eval_potential(p, phi.values, W)
    lam_n = m.lam(ops.cell_to_node(theta.values, theta.bc))
    xy = lam_n * go.xy
    return TensorField(g, lam_c * (go.xx + iso), lam_c * (go.yy + iso), xy, xy.copy())


def capillary_force(phi: ScalarField, theta: ScalarField, p: PotentialParams, m: CoefficientModel) -> MACVectorField:
    """``-div sigma`` on faces, in conservative form."""
    f = ops.tensor_div(capillary_stress(phi, theta, p, m))
    return f * -1.0


def buoyancy_force(theta: ScalarField, phys: PhysicalParams) -> MACVectorField:
    """``(Ra theta - Ga) g e2`` on interior y-faces."""
    g = theta.grid
    fy = np.zeros(g.yface_shape)
    th = ops.cell_to_yface(theta.values, theta.bc)
    fy[:, 1:-1] = (phys.Ra * th[:, 1:-1] - phys.Ga) * phys.g
    return MACVectorField(g, np.zeros(g.xface_shape), fy)


def viscosity_fields(theta: ScalarField, m: CoefficientModel):
    """``nu(theta)`` at cells and at nodes."""
    nu_c = m.nu(theta.values)
    nu_n = m.nu(ops.cell_to_node(theta.values, theta.bc))
    return nu_c, nu_n


def viscous_operator(theta: ScalarField, m: CoefficientModel, shift: float = 0.0, scale: float = 1.0):
    """``shift I + scale V(nu(theta))`` and the mean viscosity."""
    nu_c, nu_n = viscosity_fields(theta, m)
    return ops.viscous_matrix(theta.grid, nu_c, nu_n, shift, scale), float(np.mean(nu_c))


def project(w: MACVectorField):
    """Leray projection: ``u = w - grad q`` with ``div u = 0``; returns ``(u, q)``.

    The Neumann pressure Poisson problem is solved exactly by the DCT.
    """
    g = w.grid
    dw = ops.div(w).values
    q = transform_solve(dw - dw.mean(), g, NEUMANN, 0.0, -1.0)
    q -= q.mean()
    gq = ops.grad(ScalarField(g, q, NEUMANN))
    u = MACVectorField(g, w.ux - gq.ux, w.uy - gq.uy).with_noslip()
    return u, q


def viscous_solve(rhs: MACVectorField, A, nu_bar: float, dt: float, cfg: SolverConfig) -> MACVectorField:
    """Solve ``A u = rhs`` on interior unknowns, ``A = I - dt V``."""
    g = rhs.grid

    def prec(r):
        return velocity_transform_solve(g, r, 1.0, dt * nu_bar)

    b = rhs.interior()
    x = solve_spd(A, b, cfg, precond=prec, what="viscous predictor", x0=b)
    return MACVectorField.from_interior(g, x)


def ns_step(state: SimState, phys: PhysicalParams, m: CoefficientModel, cfg: NSStepConfig,
            potential: PotentialParams | None = None, extra_force: MACVectorField | None = None,
            capillary: bool = True):
    """One projection step for the momentum equation.

    Predictor ``u*`` solves ``(u* - u)/dt + N(u, u) = div(2 nu(theta) D u*)``
    with no-slip.  The capillary and buoyancy forces are added just before
    the projection, ``u+ = P(u* + dt f)``, so that any gradient part of the
    forcing is absorbed into the pressure exactly.

    Returns ``(u_next, p_next)``.
    """
    p = potential if potential is not None else PotentialParams()
    g = state.grid
    dt = cfg.dt
    u = state.u
    rhs = u
    if cfg.advection and u.max_abs() > 0.0:
        rhs = u - ops.momentum_advection(u, u) * dt
    if cfg.viscous_treatment == SEMI_IMPLICIT:
        A, nu_bar = viscous_operator(state.theta, m, 1.0, -dt)
        ustar = viscous_solve(rhs, A, nu_bar, dt, cfg.linear)
    else:
        V, _ = viscous_operator(state.theta, m)
        ustar = MACVectorField.from_interior(g, rhs.interior() + dt * (V @ u.interior()))

    force = buoyancy_force(state.theta, phys)
    if capillary:
        force = force + capillary_force(state.phi, state.theta, p, m)
    if extra_force is not None:
        force = force + extra_force
    w = (ustar + force * dt).with_noslip()
    u_next, q = project(w)
    return u_next, ScalarField(g, q / dt, NEUMANN)


def kinetic_energy(u: MACVectorField) -> float:
    return 0.5 * ops.inner(u, u)
