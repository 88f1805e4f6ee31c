"""Convective Cahn-Hilliard step with the logarithmic potential.

Time discretisation (convex splitting, explicit convection):

    (phi+ - phi) / dt - div(u phi) ... = Lap mu+
    mu+ = -Lap phi+ + F'(phi+) - B phi

The chemical potential is the Newton unknown.  Given ``mu`` the order
parameter follows explicitly as ``phi(mu) = phi - dt div(u phi) + dt L mu``,
so every iterate conserves mass exactly (the cell sum of ``L mu`` and of the
flux-form convection vanish by telescoping).  The remaining equation

    R(mu) = mu + L phi(mu) - F'(phi(mu)) + B phi = 0

is solved by damped Newton-GMRES, preconditioned by the constant-coefficient
operator ``I + dt L^2 - dt S L`` (``S`` the mean of ``F''``) which the DCT
diagonalises.  States pressed against +-1 stall this iteration; they fall
back to a Newton on ``w = F'(phi)`` with a direct factorisation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import operators as ops
from .elliptic import SolverConfig, apply_symbol
from .errors import DomainError, NonConvergenceError
from .fields import NEUMANN, MACVectorField, ScalarField
from .potential import FP, FPP, W, PotentialParams, eval_potential, fp_inverse


@dataclass(frozen=True)
class CHStepConfig:
    dt: float
    newton: SolverConfig = field(default_factory=lambda: SolverConfig(rel_tol=1e-11, max_iter=50))
    convection_scheme: str = ops.UPWIND
    gmres_tol: float = 1e-9

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")


def ch_energy(phi: ScalarField, p: PotentialParams) -> float:
    """``1/2 |grad phi|^2 + int W(phi)`` with face-weighted gradients."""
    v = ops.grad(phi)
    return 0.5 * ops.inner(v, v) + float(np.sum(ops.cell_weights(phi.grid) * eval_potential(p, phi.values, W)))


def chemical_potential(phi: ScalarField, p: PotentialParams) -> ScalarField:
    """``mu = -Lap phi + W'(phi)`` at a single time level."""
    return ScalarField(phi.grid, -ops.laplacian(phi).values + eval_potential(p, phi.values, "Wp"), NEUMANN)


def separation_delta(phi: ScalarField) -> float:
    """Instantaneous separation margin ``1 - max|phi|``."""
    m = phi.max_abs()
    if not m < 1.0:
        raise DomainError(f"max |phi| = {m!r} is not below 1")
    return 1.0 - m


def ch_step(phi_n: ScalarField, u_n: MACVectorField | None, p: PotentialParams, cfg: CHStepConfig,
            mu_guess: ScalarField | None = None, source: np.ndarray | None = None):
    """Advance the order parameter by one step.

    Parameters
    ----------
    phi_n : ScalarField
        Current order parameter, strictly inside (-1, 1).
    u_n : MACVectorField or None
        Advecting velocity at the old level; ``None`` means no convection.
    p : PotentialParams
    cfg : CHStepConfig
    mu_guess : ScalarField, optional
        Starting value for Newton, typically the previous chemical potential.
    source : ndarray, optional
        Extra cell source added to the phi equation (manufactured solutions).

    Returns
    -------
    (phi_next, mu_next) : tuple of ScalarField

    Notes
    -----
    When ``phi`` is pressed against +-1 the chemical-potential Newton can
    only take tiny steps.  It then hands over to :func:`_barrier_newton`,
    which iterates on ``w = F'(phi)`` instead.
    """
    grid = phi_n.grid
    dt = cfg.dt
    phin = phi_n.values
    if not np.all(np.abs(phin) < 1.0):
        raise DomainError("phi_n must lie strictly inside (-1, 1)")
    L = ops.laplacian_matrix(grid, NEUMANN)
    base = phin.copy()
    if u_n is not None and u_n.max_abs() > 0.0:
        base = base + dt * ops.advect(phi_n, u_n, cfg.convection_scheme).values
    if source is not None:
        base = base + dt * np.asarray(source, dtype=float)
    if not np.all(np.abs(base) < 1.0):
        raise DomainError("explicit convection pushed phi out of (-1, 1); reduce dt or use upwind convection")
    try:
        ph, mu = _mu_newton(grid, L, base, phin, p, cfg, mu_guess)
    except _Stalled:
        ph, mu = _barrier_newton(L, base, phin, p, cfg)
    return ScalarField(grid, ph, NEUMANN), ScalarField(grid, mu, NEUMANN)


class _Stalled(Exception):
    """The chemical-potential Newton cannot make progress."""


#: consecutive line searches below this step length count as stalling
_SHORT_STEP = 1e-3
_MAX_SHORT_STEPS = 3
#: cap on |phi| for the barrier Newton starting point
_BARRIER_START = 0.99


def _mu_newton(grid, L, base, phin, p: PotentialParams, cfg: CHStepConfig, mu_guess):
    shape = base.shape
    dt = cfg.dt
    concave = p.B * phin

    def Lm(x):
        return (L @ x.ravel()).reshape(shape)

    def phi_of(mu):
        return base + dt * Lm(mu)

    def residual(mu, ph):
        return mu + Lm(ph) - eval_potential(p, ph, FP) + concave

    absL = abs(L)
    eps = np.finfo(float).eps

    def roundoff(mu, ph):
        # size of the rounding error in evaluating R: the terms of L phi(mu)
        # cancel heavily on fine grids and small residuals are unreachable
        inner = np.abs(ph).ravel() + dt * (absL @ np.abs(mu).ravel())
        return 16.0 * eps * float(np.max(absL @ inner))

    def feasible(ph):
        return bool(np.max(np.abs(ph)) < 1.0)

    mu = None
    for cand in ((mu_guess.values if mu_guess is not None else None),
                 -Lm(phin) + eval_potential(p, phin, FP) - concave):
        if cand is not None and feasible(phi_of(cand)):
            mu = np.array(cand, dtype=float)
            break
    if mu is None:
        mu = np.full(shape, float(np.mean(eval_potential(p, base, FP) - concave)))

    ph = phi_of(mu)
    r = residual(mu, ph)
    r2 = float(np.linalg.norm(r))
    tol_cfg = cfg.newton
    short = 0
    n = ph.size
    for it in range(tol_cfg.max_iter + 1):
        scale = 1.0 + float(np.max(np.abs(mu))) + float(np.max(np.abs(Lm(ph))))
        floor = roundoff(mu, ph)
        rn = float(np.max(np.abs(r)))
        if rn <= max(tol_cfg.rel_tol * scale, floor):
            return ph, mu
        if it == tol_cfg.max_iter:
            break
        fpp = eval_potential(p, ph, FPP)
        s_bar = float(np.mean(fpp))

        def jac(v, fpp=fpp):
            v = v.reshape(shape)
            lv = Lm(v)
            return (v + dt * Lm(lv) - dt * fpp * lv).ravel()

        def prec(v, s=s_bar):
            return apply_symbol(v.reshape(shape), grid, NEUMANN,
                                lambda lam: 1.0 / (1.0 + dt * lam**2 - dt * s * lam)).ravel()

        J = spla.LinearOperator((n, n), matvec=jac, dtype=float)
        M = spla.LinearOperator((n, n), matvec=prec, dtype=float)
        # inexact Newton: only ask GMRES for the accuracy this step can use
        eta = min(1e-3, max(cfg.gmres_tol, 0.01 * tol_cfg.rel_tol * scale / rn))
        # a handful of iterations suffices away from the barrier; a miss
        # means F'' varies too wildly for the preconditioner
        step, info = spla.gmres(J, -r.ravel(), rtol=eta, atol=0.0, restart=60, maxiter=2, M=M)
        if info != 0 or not np.all(np.isfinite(step)):
            raise _Stalled
        step = step.reshape(shape)
        t = 1.0
        while True:
            mu_t = mu + t * step
            ph_t = phi_of(mu_t)
            if feasible(ph_t):
                r_t = residual(mu_t, ph_t)
                r2_t = float(np.linalg.norm(r_t))
                if r2_t < r2 or t == 1.0 and r2_t <= 1e-14 * scale:
                    break
            t *= 0.5
            if t < 1e-10:
                if rn <= 100.0 * floor:
                    # stagnation at the rounding level
                    return ph, mu
                raise _Stalled
        short = short + 1 if t < _SHORT_STEP else 0
        if short >= _MAX_SHORT_STEPS:
            raise _Stalled
        mu, ph, r, r2 = mu_t, ph_t, r_t, r2_t
    raise _Stalled


def _barrier_newton(L, base, phin, p: PotentialParams, cfg: CHStepConfig):
    """Damped Newton on ``w = F'(phi+)`` for states pressed against +-1.

    Eliminating ``mu`` gives ``(I + dt L^2) phi(w) - dt L w + dt L (B phi) = base``
    with ``phi(w) = tanh(w / A)``, which stays inside (-1, 1) for every ``w``.
    The Jacobian ``(I + dt L^2) diag(phi') - dt L`` is factorised directly.
    Mass is conserved up to the residual only, so the result is mapped back
    through ``phi = base + dt L mu`` whenever that keeps ``|phi| < 1``.
    """
    shape = base.shape
    dt = cfg.dt
    n = base.size
    b = base.ravel()
    c = p.B * phin.ravel()
    A = (sp.identity(n, format="csr") + dt * (L @ L)).tocsr()
    Lc = L @ c
    absA, absL = abs(A), abs(L)
    eps = np.finfo(float).eps

    def G(w):
        return A @ fp_inverse(p, w) - dt * (L @ w) + dt * Lc - b

    def floor(w):
        return 16.0 * eps * float(np.max(absA @ np.abs(fp_inverse(p, w)) + dt * (absL @ np.abs(w))
                                         + dt * np.abs(Lc) + np.abs(b)))

    tol_cfg = cfg.newton
    # start off the saturated part of tanh, where phi'(w) ~ 0 makes the
    # Jacobian blind to w and Newton crawls
    w = eval_potential(p, np.clip(phin, -_BARRIER_START, _BARRIER_START), FP).ravel()
    r = G(w)
    r2 = float(np.linalg.norm(r))
    rn = float(np.max(np.abs(r)))
    for it in range(tol_cfg.max_iter):
        if rn <= max(tol_cfg.rel_tol, floor(w)):
            break
        ph = fp_inverse(p, w)
        J = (A @ sp.diags((1.0 - ph**2) / p.A) - dt * L).tocsc()
        step = spla.splu(J).solve(-r)
        t = 1.0
        while True:
            w_t = w + t * step
            r_t = G(w_t)
            r2_t = float(np.linalg.norm(r_t))
            if r2_t < r2:
                break
            t *= 0.5
            if t < 1e-12:
                if rn <= 100.0 * floor(w):
                    break
                raise NonConvergenceError("Cahn-Hilliard Newton: line search failed; try a smaller dt", rn, it)
        if t < 1e-12:
            break
        w, r, r2 = w_t, r_t, r2_t
        rn = float(np.max(np.abs(r)))
    if rn > max(tol_cfg.rel_tol, 100.0 * floor(w)):
        raise NonConvergenceError(
            f"Cahn-Hilliard Newton did not converge in {tol_cfg.max_iter} iterations "
            f"(residual {rn:.3e}); try a smaller dt", rn, tol_cfg.max_iter)
    ph = fp_inverse(p, w)
    mu = -(L @ ph) + w - c
    exact = b + dt * (L @ mu)
    if np.all(np.abs(exact) < 1.0):
        ph = exact
    return ph.reshape(shape), mu.reshape(shape)
