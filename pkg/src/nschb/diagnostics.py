"""Energy functionals, dual norms, identity residuals and invariant tracking.

Every inequality constant is reported as an empirical ratio; nothing here
asserts a value for it.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from . import norms
from . import operators as ops
from .cahn_hilliard import ch_energy, chemical_potential
from .elliptic import SolverConfig, solve_stokes, v0_dual_norm, vsigma_dual_norm
from .errors import GridMismatchError
from .fields import MACVectorField, ScalarField
from .potential import W, WP, CoefficientModel, PotentialParams, eval_potential
from .state import SimState

#: slack for counting decoupled energy increases
ENERGY_SLACK = 1e-10


@dataclass(frozen=True)
class EnergyReport:
    """Energy-type functionals of one state.

    ``beta`` is the higher-order energy, ``gamma_dissipation`` and ``g_forcing``
    its dissipation and forcing companions.  Time derivatives come from a
    backward difference against the previous state (zero without one).
    """

    t: float
    kinetic: float
    interfacial: float
    potential_int: float
    E1: float
    beta: float
    gamma_dissipation: float
    g_forcing: float
    grad_mu_sq: float
    grad_u_sq: float
    coupling: float

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class InvariantReport:
    mass_drift: float = 0.0
    theta_max_excess: float = 0.0
    min_separation: float = 1.0
    energy_violations: int = 0
    divergence_max: float = 0.0
    steps: int = 0

    def as_dict(self) -> dict:
        return asdict(self)


# --- building blocks --------------------------------------------------------


def _face_average(f: ScalarField) -> MACVectorField:
    return MACVectorField(f.grid, ops.cell_to_xface(f.values, f.bc), ops.cell_to_yface(f.values, f.bc))


def _face_product(a: MACVectorField, b: MACVectorField) -> MACVectorField:
    return MACVectorField(a.grid, a.ux * b.ux, a.uy * b.uy)


def coupling_term(u: MACVectorField, phi: ScalarField, mu: ScalarField, form: str = "skew") -> float:
    """``(u . grad phi, mu)``.

    ``form="skew"`` evaluates ``-(phi u, grad mu)``; ``form="advective"``
    averages the face products ``u grad phi`` to cells and pairs them with
    ``mu``.  The two agree up to the truncation error for divergence-free
    ``u``.
    """
    if form == "skew":
        return -ops.inner(_face_product(u, _face_average(phi)), ops.grad(mu))
    if form == "advective":
        gp = ops.grad(phi)
        adv = ops.xface_to_cell(u.ux * gp.ux) + ops.yface_to_cell(u.uy * gp.uy)
        return float(np.sum(ops.cell_weights(phi.grid) * adv * mu.values))
    raise ValueError(f"unknown form {form!r}")


def _viscous_dissipation(u: MACVectorField, theta: ScalarField, m: CoefficientModel) -> float:
    """``int nu(theta) |D u|^2``."""
    D = ops.sym_grad(u)
    nu_c = m.nu(theta.values)
    nu_n = m.nu(ops.cell_to_node(theta.values, theta.bc))
    wc, wn = ops.cell_weights(u.grid), ops.node_weights(u.grid)
    return float(np.sum(wc * nu_c * (D.xx**2 + D.yy**2)) + np.sum(wn * nu_n * (D.xy**2 + D.yx**2)))


def _sq(x: float) -> float:
    return float(x) ** 2


# --- operations -------------------------------------------------------------


def energy_report(state: SimState, p: PotentialParams, m: CoefficientModel,
                  prev: SimState | None = None) -> EnergyReport:
    """Energy functionals of ``state``; ``prev`` supplies backward differences."""
    u, phi, mu, theta = state.u, state.phi, state.mu, state.theta
    kinetic = 0.5 * ops.inner(u, u)
    gphi = ops.grad(phi)
    interfacial = 0.5 * ops.inner(gphi, gphi)
    potential_int = float(np.sum(ops.cell_weights(phi.grid) * eval_potential(p, phi.values, W)))
    al = m.a * m.lambda0
    E1 = al * (interfacial + potential_int) + kinetic
    grad_mu_sq = _sq(norms.h1_seminorm(mu))
    grad_u_sq = _sq(norms.h1_seminorm(u))
    coupling = coupling_term(u, phi, mu, "skew")

    theta_t_sq = gamma = 0.0
    if prev is not None and state.t > prev.t:
        dt = state.t - prev.t
        theta_t = (theta - prev.theta) * (1.0 / dt)
        phi_t = (phi - prev.phi) * (1.0 / dt)
        u_t = (u - prev.u) * (1.0 / dt)
        theta_t_sq = _sq(norms.lp_norm(theta_t))
        gamma = (0.5 * m.kappa_lo * _sq(norms.h1_seminorm(theta_t)) + 0.25 * _sq(norms.h1_seminorm(phi_t))
                 + 0.5 * ops.inner(u_t, u_t))
    beta = _viscous_dissipation(u, theta, m) + 0.5 * grad_mu_sq + 0.5 * theta_t_sq + coupling

    u_vs = _sq(norms.h1_seminorm(u))
    g_forcing = (u_vs + _sq(norms.lp_norm(phi)) + _sq(norms.lp_norm(mu)) + grad_mu_sq
                 + _sq(norms.lp_norm(theta)) + _sq(norms.h1_seminorm(theta)))
    return EnergyReport(state.t, kinetic, interfacial, potential_int, E1, beta, gamma, g_forcing,
                        grad_mu_sq, grad_u_sq, coupling)


def dual_norms(f, cfg: SolverConfig | None = None) -> float:
    """``||f||_{V0'}`` for a mean-zero scalar, ``||f||_{Vsigma'}`` for a vector field."""
    cfg = cfg or SolverConfig()
    if isinstance(f, ScalarField):
        return v0_dual_norm(f, cfg)
    if isinstance(f, MACVectorField):
        return vsigma_dual_norm(f, cfg)
    raise TypeError(f"unsupported field type {type(f).__name__}")


def kronecker_residual(phi: ScalarField, mu: ScalarField | None, u: MACVectorField,
                       p: PotentialParams | None = None) -> float:
    """``|(grad phi (x) grad phi, grad u) + (phi u, grad mu)|`` with ``mu = -Lap phi + W'(phi)``.

    The ``mu`` argument is accepted for call-site symmetry and ignored: the
    identity needs the chemical potential consistent with ``phi``.
    """
    p = p or PotentialParams()
    mu_c = chemical_potential(phi, p)
    lhs = ops.inner(ops.grad_outer(phi), ops.velocity_gradient(u))
    rhs = ops.inner(_face_product(u, _face_average(phi)), ops.grad(mu_c))
    return abs(lhs + rhs)


def continuous_dependence_lambda(s1: SimState, s2: SimState, cfg: SolverConfig | None = None) -> float:
    """``||u||_{Vsigma'}^2 + ||phi - mean phi||_{V0'}^2 + ||theta||^2`` of ``s1 - s2``."""
    if s1.grid != s2.grid:
        raise GridMismatchError("states live on different grids")
    cfg = cfg or SolverConfig()
    du = s1.u - s2.u
    dphi = s1.phi - s2.phi
    dth = s1.theta - s2.theta
    out = _sq(norms.lp_norm(dth))
    if du.max_abs() > 0.0:
        out += _sq(vsigma_dual_norm(du, cfg))
    if np.ptp(dphi.values) > 0.0:
        # centre twice: one pass leaves a mean at the rounding level of the old mean
        v = dphi.values - dphi.values.mean()
        out += _sq(v0_dual_norm(dphi.with_values(v - v.mean()), cfg))
    return out


def _ratio(num: float, den: float) -> float:
    return float(num / den) if den > 0.0 else 0.0


def inequality_checks(state: SimState, gamma: float = 0.25, p: PotentialParams | None = None) -> dict:
    """Realised ratios ``LHS / RHS`` (constant removed) for one state.

    Keys:

    * ``h2_phi``: ``||phi||_{H2}^2 / (||phi||^2 + ||grad mu|| ||grad phi||)``
    * ``korn``: ``||grad u|| / ||D u||``
    * ``mean_mu``: ``(|mean mu| + ||W'(phi)||_{L1}) / (1 + ||grad mu||)``
    * ``log_w14``, ``log_holder``, ``log_h2``: the logarithms feeding
      :func:`holder_exponent_fit`; ``nan`` for a zero ``theta``

    Degenerate denominators give a ratio of 0.
    """
    p = p or PotentialParams()
    phi, mu, u, theta = state.phi, state.mu, state.u, state.theta
    out = {}
    gphi, gmu = norms.h1_seminorm(phi), norms.h1_seminorm(mu)
    out["h2_phi"] = _ratio(_sq(norms.h2_norm(phi)), _sq(norms.lp_norm(phi)) + gmu * gphi)
    out["korn"] = korn_ratio(u)
    wp = eval_potential(p, phi.values, WP)
    l1 = float(np.sum(ops.cell_weights(phi.grid) * np.abs(wp)))
    out["mean_mu"] = _ratio(abs(mu.mean()) + l1, 1.0 + gmu)
    if theta.max_abs() > 0.0:
        out["log_w14"] = float(np.log(norms.w14_norm(theta)))
        out["log_holder"] = float(np.log(holder_norm(theta, gamma)))
        out["log_h2"] = float(np.log(norms.h2_norm(theta)))
    else:
        out["log_w14"] = out["log_holder"] = out["log_h2"] = float("nan")
    return out


def korn_ratio(u: MACVectorField) -> float:
    """``||grad u|| / ||D u||`` (0 for ``u = 0``)."""
    T = ops.velocity_gradient(u)
    D = ops.sym_grad(u)
    return _ratio(np.sqrt(ops.inner(T, T)), np.sqrt(ops.inner(D, D)))


def holder_norm(f: ScalarField, gamma: float) -> float:
    """``||f||_{C^gamma} = max|f| + [f]_gamma``."""
    return f.max_abs() + norms.holder_seminorm(f, gamma)


def holder_exponent_fit(log_w14, log_holder, log_h2, xi_grid=None):
    """Best interpolation exponent in ``||f||_{W14} <= C ||f||_{C^g}^xi ||f||_{H2}^(1-xi)``.

    Scans ``xi`` over ``(1/2, 1)`` and keeps the one whose per-snapshot
    constants ``log C_j = log_w14 - xi log_holder - (1 - xi) log_h2`` have the
    smallest variance, i.e. the least-squares exponent restricted to the
    scan.  Returns ``(xi, C)`` with ``C`` the largest realised constant.
    """
    a, b, c = (np.asarray(v, dtype=float) for v in (log_w14, log_holder, log_h2))
    if a.size < 2:
        raise ValueError("need at least two snapshots")
    if xi_grid is None:
        xi_grid = np.linspace(0.5, 1.0, 501)[1:-1]
    logc = a[None, :] - xi_grid[:, None] * b[None, :] - (1.0 - xi_grid[:, None]) * c[None, :]
    k = int(np.argmin(np.var(logc, axis=1)))
    return float(xi_grid[k]), float(np.exp(np.max(logc[k])))


def stokes_constants(g: MACVectorField, cfg: SolverConfig | None = None) -> dict:
    """Ratios for the Stokes estimates, for one forcing ``g``.

    * ``pressure_l4``: ``||p||_{L4} / (||grad S^-1 g||^{1/2} ||g||^{1/2})``
    * ``stokes_h2``: ``(||u||_{H2} + ||p||_{H1}) / ||g||``
    """
    cfg = cfg or SolverConfig()
    sol = solve_stokes(g, cfg)
    gn = norms.lp_norm(g)
    dual = norms.h1_seminorm(sol.u)
    p_h1 = np.sqrt(_sq(norms.lp_norm(sol.p)) + _sq(norms.h1_seminorm(sol.p)))
    return {
        "pressure_l4": _ratio(norms.lp_norm(sol.p, 4.0), np.sqrt(dual * gn)),
        "stokes_h2": _ratio(norms.h2_norm(sol.u) + p_h1, gn),
    }


def interpolation_ratio(f: ScalarField, cfg: SolverConfig | None = None) -> float:
    """``||f||^2 / (||f||_{V0'} ||grad f||)`` for mean-zero ``f``; at most 1."""
    f0 = f.with_values(f.values - f.values.mean())
    if not np.any(f0.values):
        return 0.0
    return _ratio(_sq(norms.lp_norm(f0)), v0_dual_norm(f0, cfg or SolverConfig()) * norms.h1_seminorm(f0))


# --- invariants over a trajectory -------------------------------------------


@dataclass
class InvariantTracker:
    """Sequential fold of :class:`InvariantReport` over states.

    ``decoupled`` enables counting energy increases, which only makes sense
    when the Cahn-Hilliard energy is a Lyapunov functional (no flow).
    """

    p: PotentialParams = field(default_factory=PotentialParams)
    decoupled: bool = False
    slack: float = ENERGY_SLACK
    _mean0: float | None = None
    _theta0: float = 0.0
    _last_energy: float | None = None
    report: InvariantReport = field(default_factory=InvariantReport)

    def update(self, state: SimState) -> InvariantReport:
        r = self.report
        phi = state.phi
        if self._mean0 is None:
            self._mean0 = phi.mean()
            self._theta0 = state.theta.max_abs()
        sep = 1.0 - phi.max_abs()
        violations = r.energy_violations
        if self.decoupled:
            e = ch_energy(phi, self.p)
            if self._last_energy is not None and e > self._last_energy + self.slack:
                violations += 1
            self._last_energy = e
        self.report = InvariantReport(
            mass_drift=max(r.mass_drift, abs(phi.mean() - self._mean0)),
            theta_max_excess=max(r.theta_max_excess, state.theta.max_abs() - self._theta0, 0.0),
            min_separation=min(r.min_separation, sep),
            energy_violations=violations,
            divergence_max=max(r.divergence_max, float(np.max(np.abs(ops.div(state.u).values)))),
            steps=r.steps + 1,
        )
        return self.report


def invariant_report(trajectory, p: PotentialParams | None = None, decoupled: bool = False) -> InvariantReport:
    """Aggregate invariants over a non-empty sequence of states."""
    tracker = InvariantTracker(p or PotentialParams(), decoupled)
    n = 0
    for s in trajectory:
        tracker.update(s)
        n += 1
    if n == 0:
        raise ValueError("empty trajectory")
    return tracker.report


__all__ = [
    "EnergyReport", "InvariantReport", "InvariantTracker", "energy_report", "dual_norms",
    "kronecker_residual", "continuous_dependence_lambda", "inequality_checks", "invariant_report",
    "coupling_term", "korn_ratio", "holder_norm", "holder_exponent_fit",
    "stokes_constants", "interpolation_ratio",
]
