"""Coupled time loop, experiments and run output.

One step advances ``theta``, then ``(phi, mu)`` with the old velocity, then
the velocity with the new ``theta``, ``phi`` and ``mu``.
"""

from __future__ import annotations

import csv
import json
import os
import platform
import time as _time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import operators as ops
from .boussinesq import theta_step
from .cahn_hilliard import CHStepConfig, ch_step, chemical_potential
from .config import DECOUPLED_CH, FULL, GALERKIN, SimConfig
from .diagnostics import (EnergyReport, InvariantReport, InvariantTracker, continuous_dependence_lambda,
                          energy_report)
from .elliptic import SolverConfig, assert_strict_bound, solve_singular_elliptic
from .errors import InvariantViolation, NSCHBError
from .fields import (DIRICHLET, NEUMANN, Grid, MACVectorField, ScalarField, read_array_csv,
                     write_array_csv)
from .galerkin import GalerkinBasis, ModalForcing, galerkin_ns_step, galerkin_project
from .manufactured import ch_solution, heat_solution
from .norms import holder_seminorm
from .navier_stokes import NSStepConfig, ns_step
from .state import SimState

#: absolute divergence tolerance for emitted states, scaled by max(1, |u|/h)
DIV_TOL = 1e-8
#: invariant thresholds used for the exit status
MASS_TOL = 1e-12
THETA_TOL = 1e-12

SNAPSHOT_FIELDS = ("ux", "uy", "p", "phi", "mu", "theta")


class StepError(NSCHBError):
    """A sub-step failed; carries the step index and the last good state."""

    def __init__(self, message: str, step: int, state: SimState):
        super().__init__(message)
        self.step = step
        self.state = state


# --- initial data -----------------------------------------------------------


def _bump(grid: Grid):
    X, Y = grid.cell_coords()
    return np.sin(np.pi * X / grid.lx) * np.sin(np.pi * Y / grid.ly)


def _velocity(grid: Grid, amplitude: float) -> MACVectorField:
    """Divergence-free no-slip cell from the streamfunction ``sin^2 sin^2``."""
    if amplitude == 0.0:
        return MACVectorField.zeros(grid)
    Xn, Yn = grid.node_coords()
    psi = (np.sin(np.pi * Xn / grid.lx) * np.sin(np.pi * Yn / grid.ly)) ** 2
    # sin(pi) is not exactly zero; pin psi on the wall so no-slip holds exactly
    psi[[0, -1], :] = 0.0
    psi[:, [0, -1]] = 0.0
    u = MACVectorField.from_streamfunction(grid, psi)
    return u * (amplitude / u.max_abs())


def initial_state(cfg: SimConfig) -> SimState:
    """Initial fields for the configured preset.

    * ``zero``: everything vanishes.
    * ``strong_data``: smooth ``phi0 = a cos cos`` with ``max|phi0| = a``,
      ``mu0 = -Lap phi0 + W'(phi0)``, a Dirichlet bump for ``theta0`` and an
      optional smooth vortex.
    * ``weak_data``: rough chemical-potential data ``mu~`` (seeded noise)
      turned into ``phi0`` by one singular elliptic solve, so that
      ``|phi0| < 1`` and ``mu0 = mu~ - B phi0`` is consistent with it.
    * ``spinodal``: ``phi0 = mean + uniform noise``, no flow, no temperature.
    * ``snapshot``: read from ``initial.path``.
    """
    ini = cfg.initial
    grid = cfg.grid_obj()
    p = cfg.potential_params()
    if ini.preset == "snapshot":
        return read_snapshot(ini.path)
    zero = SimState.zeros(grid)
    if ini.preset == "zero":
        return zero
    rng = np.random.default_rng(ini.seed)
    theta = ScalarField(grid, ini.theta_amplitude * _bump(grid), DIRICHLET)
    u = _velocity(grid, ini.velocity_amplitude)
    if ini.preset == "strong_data":
        X, Y = grid.cell_coords()
        phi = ScalarField(grid, ini.phi_mean + ini.phi_amplitude * np.cos(np.pi * X / grid.lx)
                          * np.cos(np.pi * Y / grid.ly))
        mu = chemical_potential(phi, p)
    elif ini.preset == "weak_data":
        noise = rng.uniform(-1.0, 1.0, grid.shape)
        mu_tilde = ScalarField(grid, ini.phi_amplitude * noise)
        phi = solve_singular_elliptic(mu_tilde, p, cfg.solver_config())
        mu = ScalarField(grid, mu_tilde.values - p.B * phi.values)
    else:  # spinodal
        phi = ScalarField(grid, ini.phi_mean + ini.phi_amplitude * rng.uniform(-1.0, 1.0, grid.shape))
        mu = chemical_potential(phi, p)
        theta = zero.theta
        u = zero.u
    if cfg.mode == DECOUPLED_CH:
        u, theta = zero.u, zero.theta
    return SimState(0.0, u, zero.p, phi, mu, theta)


# --- snapshots --------------------------------------------------------------


def check_state(state: SimState):
    """Raise :class:`InvariantViolation` unless ``state`` is admissible."""
    if not state.is_finite():
        raise InvariantViolation("state has non-finite values")
    if not state.phi.max_abs() < 1.0:
        raise InvariantViolation(f"max |phi| = {state.phi.max_abs()!r} is not below 1")
    g = state.grid
    d = float(np.max(np.abs(ops.div(state.u).values)))
    if d > DIV_TOL * max(1.0, state.u.max_abs() / g.h):
        raise InvariantViolation(f"velocity divergence {d:.3e} above tolerance")
    if not state.u.is_no_slip():
        raise InvariantViolation("velocity violates no-slip")


def write_snapshot(directory, state: SimState, check: bool = True) -> Path:
    if check:
        check_state(state)
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    g = state.grid
    arrays = {
        "ux": (state.u.ux, "noslip"), "uy": (state.u.uy, "noslip"), "p": (state.p.values, NEUMANN),
        "phi": (state.phi.values, NEUMANN), "mu": (state.mu.values, NEUMANN),
        "theta": (state.theta.values, DIRICHLET),
    }
    for name, (values, bc) in arrays.items():
        write_array_csv(d / f"{name}.csv", g, values, bc, name, state.t)
    return d


def read_snapshot(directory) -> SimState:
    d = Path(directory)
    data = {}
    grid = t = None
    for name in SNAPSHOT_FIELDS:
        g, values, bc, _, tt = read_array_csv(d / f"{name}.csv")
        if grid is not None and g != grid:
            raise ValueError(f"{d}: fields live on different grids")
        grid, t = g, tt
        data[name] = (values, bc)
    u = MACVectorField(grid, data["ux"][0], data["uy"][0])
    sc = {k: ScalarField(grid, data[k][0], data[k][1]) for k in ("p", "phi", "mu", "theta")}
    return SimState(t, u, sc["p"], sc["phi"], sc["mu"], sc["theta"])


# --- stepping ---------------------------------------------------------------


@dataclass
class Stepper:
    """Advance a state by one coupled step according to ``cfg``."""

    cfg: SimConfig
    basis: GalerkinBasis | None = None

    def __post_init__(self):
        c = self.cfg
        self.p = c.potential_params()
        self.m = c.coefficient_model()
        self.phys = c.physical_params()
        self.dt = c.time.dt
        solver = c.solver_config()
        self.ch_cfg = CHStepConfig(
            self.dt, SolverConfig(c.cahn_hilliard.newton_rel_tol, c.cahn_hilliard.newton_max_iter, solver.method),
            c.cahn_hilliard.scheme)
        self.ns_cfg = NSStepConfig(self.dt, c.navier_stokes.viscous_treatment,
                                   SolverConfig(c.navier_stokes.rel_tol, solver.max_iter, solver.method),
                                   c.navier_stokes.advection)
        self.theta_cfg = SolverConfig(c.boussinesq.rel_tol, solver.max_iter, solver.method)
        if c.mode == GALERKIN and self.basis is None:
            self.basis = GalerkinBasis.build(c.grid_obj(), c.galerkin.m, solver)

    def bind_theta_range(self, theta0: ScalarField):
        self.m = self.m.with_theta_range(theta0.max_abs())

    def step(self, s: SimState) -> SimState:
        dt, mode = self.dt, self.cfg.mode
        if mode == DECOUPLED_CH:
            phi, mu = ch_step(s.phi, None, self.p, self.ch_cfg, mu_guess=s.mu)
            assert_strict_bound(phi.values)
            return s.replace(t=s.t + dt, phi=phi, mu=mu)
        theta = theta_step(s.theta, s.u, self.m, dt, self.cfg.boussinesq.scheme, self.theta_cfg)
        phi, mu = ch_step(s.phi, s.u, self.p, self.ch_cfg, mu_guess=s.mu)
        assert_strict_bound(phi.values)
        mid = s.replace(theta=theta, phi=phi, mu=mu)
        if mode == FULL:
            u, p = ns_step(mid, self.phys, self.m, self.ns_cfg, self.p,
                           capillary=self.cfg.navier_stokes.capillary)
            return mid.replace(t=s.t + dt, u=u, p=p)
        coeffs, _ = galerkin_project(s.u, self.basis)
        forcing = ModalForcing(theta, phi if self.cfg.navier_stokes.capillary else None)
        coeffs = galerkin_ns_step(coeffs, self.basis, dt, forcing, self.phys, self.m, self.p,
                                  self.cfg.navier_stokes.advection)
        return mid.replace(t=s.t + dt, u=self.basis.synthesize(coeffs))


# --- run --------------------------------------------------------------------

ENERGY_COLUMNS = ("step",) + tuple(EnergyReport.__dataclass_fields__)
INVARIANT_COLUMNS = ("step", "t", "mass_drift", "theta_max_excess", "separation", "min_separation",
                     "energy_violations", "divergence_max", "theta_linf", "theta_holder")


@dataclass
class RunResult:
    state: SimState
    energy: list[dict] = field(default_factory=list)
    invariants: list[dict] = field(default_factory=list)
    modes: list[list[float]] = field(default_factory=list)
    report: InvariantReport = field(default_factory=InvariantReport)
    trajectory: list[SimState] = field(default_factory=list)
    out_dir: Path | None = None

    def violations(self) -> list[str]:
        """Names of invariants that failed, empty when all hold."""
        return _violations(self.report.as_dict())


def _violations(summary: dict) -> list[str]:
    bad = []
    if summary["mass_drift"] > MASS_TOL:
        bad.append("mass_drift")
    if summary["theta_max_excess"] > THETA_TOL:
        bad.append("theta_max_excess")
    if not summary["min_separation"] > 0.0:
        bad.append("min_separation")
    if summary["energy_violations"] > 0:
        bad.append("energy_violations")
    return bad


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None or (isinstance(v, float) and np.isnan(v)):
        return ""
    return f"{float(v):.17g}"


def _write_csv(path: Path, columns, rows):
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) if isinstance(r, dict) else _fmt(c) for c in (columns if isinstance(r, dict) else r)])


def run(cfg: SimConfig, out_dir=None, state: SimState | None = None, keep_trajectory: bool = False,
        start_step: int = 0, basis: GalerkinBasis | None = None) -> RunResult:
    """Integrate from the configured initial data (or ``state``) to ``t_end``.

    ``start_step`` offsets step numbering and the snapshot schedule when
    resuming; the state's own ``t`` sets the clock.  ``basis`` replaces the
    Galerkin basis built from the config (e.g. a truncation of a larger one).  Writes CSV reports, field
    snapshots and ``run.json`` into ``out_dir`` when given.  A failing
    sub-step raises :class:`StepError` after persisting the last good state.
    """
    t_wall = _time.perf_counter()
    s = state if state is not None else initial_state(cfg)
    if s.grid != cfg.grid_obj():
        raise ValueError("initial state grid differs from the configured grid")
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    stepper = Stepper(cfg, basis)
    stepper.bind_theta_range(s.theta)
    decoupled = cfg.mode == DECOUPLED_CH
    tracker = InvariantTracker(stepper.p, decoupled)
    result = RunResult(s, out_dir=out)
    n_total = int(round((cfg.time.t_end - s.t) / cfg.time.dt))
    t0 = s.t
    tint, sint = max(cfg.time.report_interval, 1), cfg.time.snapshot_interval
    hint = cfg.boussinesq.holder_beta

    def record(step, st, prev):
        e = energy_report(st, stepper.p, stepper.m, prev)
        result.energy.append({"step": step, **e.as_dict()})
        rep = tracker.report
        is_snap = sint > 0 and step % sint == 0
        holder = holder_seminorm(st.theta, hint) if (is_snap or step == last) else None
        result.invariants.append({
            "step": step, "t": st.t, "mass_drift": rep.mass_drift, "theta_max_excess": rep.theta_max_excess,
            "separation": 1.0 - st.phi.max_abs(), "min_separation": rep.min_separation,
            "energy_violations": rep.energy_violations, "divergence_max": rep.divergence_max,
            "theta_linf": st.theta.max_abs(), "theta_holder": holder,
        })
        if stepper.basis is not None:
            result.modes.append([step, st.t, *galerkin_project(st.u, stepper.basis)[0]])
        if out is not None and cfg.output.write_snapshots and is_snap:
            write_snapshot(out / "snapshots" / f"step_{step:07d}", st)

    last = start_step + n_total
    tracker.update(s)
    record(start_step, s, None)
    if keep_trajectory:
        result.trajectory.append(s)
    prev = s
    for k in range(1, n_total + 1):
        step = start_step + k
        try:
            nxt = stepper.step(prev)
            nxt = nxt.replace(t=t0 + k * cfg.time.dt)
        except NSCHBError as exc:
            if out is not None:
                write_snapshot(out / "last_good", prev, check=False)
            raise StepError(f"step {step} failed: {exc}", step, prev) from exc
        # invariants are folded every step, reports only at the interval
        tracker.update(nxt)
        if k % tint == 0 or k == n_total or (sint > 0 and step % sint == 0):
            record(step, nxt, prev)
            if keep_trajectory:
                result.trajectory.append(nxt)
        prev = nxt
    result.state = prev
    result.report = tracker.report
    if out is not None:
        _write_outputs(out, cfg, result, _time.perf_counter() - t_wall)
    return result


def _write_outputs(out: Path, cfg: SimConfig, result: RunResult, wall: float):
    _write_csv(out / "energy.csv", ENERGY_COLUMNS, result.energy)
    _write_csv(out / "invariants.csv", INVARIANT_COLUMNS, result.invariants)
    if result.modes:
        m = len(result.modes[0]) - 2
        cols = ("step", "t") + tuple(f"g{i + 1}" for i in range(m))
        _write_csv(out / "modes.csv", cols, result.modes)
    if cfg.output.write_snapshots:
        write_snapshot(out / "final", result.state)
    manifest = {
        "config": cfg.to_dict(),
        "versions": {"nschb": __version__, "numpy": np.__version__, "python": platform.python_version()},
        "summary": {**result.report.as_dict(), "t_final": result.state.t, "violations": result.violations()},
        "wall_seconds": wall,
    }
    (out / "run.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))


def summarize(out_dir) -> dict:
    """Re-read ``invariants.csv`` in a finished run directory and refresh ``run.json``."""
    out = Path(out_dir)
    with (out / "invariants.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{out}: no invariant rows")

    def col(name):
        return [float(r[name]) for r in rows if r[name] != ""]

    summary = {
        "steps": int(float(rows[-1]["step"])),
        "t_final": float(rows[-1]["t"]),
        "mass_drift": max(col("mass_drift")),
        "theta_max_excess": max(col("theta_max_excess")),
        "min_separation": min(col("min_separation")),
        "energy_violations": int(max(col("energy_violations"))),
        "divergence_max": max(col("divergence_max")),
    }
    summary["violations"] = _violations(summary)
    path = out / "run.json"
    manifest = json.loads(path.read_text()) if path.exists() else {}
    manifest["summary"] = summary
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return summary


# --- parallel helper --------------------------------------------------------


def max_workers() -> int:
    """Worker cap: ``NSCHB_THREADS`` if set, else the CPU count."""
    env = os.environ.get("NSCHB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ValueError(f"NSCHB_THREADS must be an integer, got {env!r}") from exc
    return os.cpu_count() or 1


def _pmap(fn, items):
    items = list(items)
    n = min(max_workers(), len(items))
    if n <= 1:
        return [fn(i) for i in items]
    with ProcessPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


# --- convergence study ------------------------------------------------------


@dataclass(frozen=True)
class OrderTable:
    target: str
    levels: tuple
    errors: tuple
    orders: tuple

    def rows(self):
        for i, (lv, err) in enumerate(zip(self.levels, self.errors)):
            yield {"level": lv, "error": err, "order": self.orders[i - 1] if i > 0 else None}


def _rms(a: np.ndarray) -> float:
    return float(np.sqrt(np.mean(a**2)))


def _heat_error(args):
    cfg, n = args
    c = cfg.with_updates(grid={"nx": n, "ny": n})
    g, m = c.grid_obj(), c.coefficient_model()
    sol = heat_solution(m, g.lx, g.ly)
    X, Y = g.cell_coords()
    th = ScalarField(g, sol.exact_field(0.0, X, Y), DIRICHLET)
    dt = c.time.dt
    scfg = SolverConfig(c.boussinesq.rel_tol, c.solvers.max_iter, c.solvers.method)
    for k in range(c.n_steps):
        th = theta_step(th, None, m, dt, cfg=scfg, source=sol.source_field((k + 1) * dt, X, Y))
    return _rms(th.values - sol.exact_field(c.n_steps * dt, X, Y))


def _ch_error(args):
    cfg, n = args
    c = cfg.with_updates(grid={"nx": n, "ny": n})
    g, p = c.grid_obj(), c.potential_params()
    sol = ch_solution(p, g.lx, g.ly)
    X, Y = g.cell_coords()
    phi, mu = ScalarField(g, sol.exact_field(0.0, X, Y)), None
    dt = c.time.dt
    chc = CHStepConfig(dt, SolverConfig(c.cahn_hilliard.newton_rel_tol, c.cahn_hilliard.newton_max_iter))
    for k in range(c.n_steps):
        phi, mu = ch_step(phi, None, p, chc, mu_guess=mu, source=sol.source_field((k + 1) * dt, X, Y))
    return _rms(phi.values - sol.exact_field(c.n_steps * dt, X, Y))


def _final_state(args):
    cfg, n = args
    c = cfg.with_updates(time={"dt": cfg.time.t_end / n, "report_interval": n, "snapshot_interval": 0})
    return run(c).state


def _state_distance(a: SimState, b: SimState) -> float:
    """Discrete L2 distance over ``u``, ``phi`` and ``theta``."""
    du = a.u - b.u
    return float(np.sqrt(ops.inner(du, du) + ops.inner(a.phi - b.phi, a.phi - b.phi)
                         + ops.inner(a.theta - b.theta, a.theta - b.theta)))


def convergence_study(cfg: SimConfig, levels, target: str = "heat") -> OrderTable:
    """Errors and observed orders over refinement ``levels``.

    ``target``:

    * ``"heat"``: manufactured temperature, ``levels`` are cell counts per axis
    * ``"ch"``: manufactured Cahn-Hilliard, ``levels`` are cell counts per axis
    * ``"temporal"``: self-convergence of the coupled scheme on the configured
      grid; ``levels`` are step counts over ``t_end``, each the double of the
      previous, and the error of level ``k`` is its distance to level ``k+1``

    Fewer than three levels is an error.
    """
    levels = tuple(int(v) for v in levels)
    if len(levels) < 3:
        raise ValueError("a convergence study needs at least three levels")
    if any(b != 2 * a for a, b in zip(levels, levels[1:])):
        raise ValueError("levels must double from one to the next")
    if target == "heat":
        errors = _pmap(_heat_error, [(cfg, n) for n in levels])
    elif target == "ch":
        errors = _pmap(_ch_error, [(cfg, n) for n in levels])
    elif target == "temporal":
        states = _pmap(_final_state, [(cfg, n) for n in levels])
        errors = [_state_distance(a, b) for a, b in zip(states, states[1:])]
        levels = levels[:-1]
    else:
        raise ValueError(f"unknown convergence target {target!r}")
    errors = tuple(float(e) for e in errors)
    orders = tuple(float(np.log2(a / b)) if b > 0 else float("inf") for a, b in zip(errors, errors[1:]))
    return OrderTable(target, levels, errors, orders)


def write_order_table(path, table: OrderTable):
    _write_csv(Path(path), ("level", "error", "order"), list(table.rows()))


# --- perturbation experiment ------------------------------------------------


@dataclass(frozen=True)
class PerturbationResult:
    times: tuple
    lam: tuple

    @property
    def amplification(self) -> float:
        return self.lam[-1] / self.lam[0] if self.lam[0] > 0 else float("nan")


def perturbation_shape(grid: Grid) -> np.ndarray:
    """Mean-zero smooth perturbation of ``phi``, unit maximum: the lowest Neumann mode in ``x``."""
    X, _ = grid.cell_coords()
    return np.cos(np.pi * X / grid.lx)


def _trajectory(args):
    cfg, eps = args
    s0 = initial_state(cfg)
    if eps:
        phi = s0.phi.values + eps * perturbation_shape(s0.grid)
        s0 = s0.replace(phi=ScalarField(s0.grid, phi), mu=chemical_potential(ScalarField(s0.grid, phi),
                                                                                 cfg.potential_params()))
    return run(cfg, state=s0, keep_trajectory=True).trajectory


def perturbation_experiment(cfg: SimConfig, eps: float, t_end: float | None = None) -> PerturbationResult:
    """Twin runs from ``phi0`` and ``phi0 + eps * shape``; returns ``Lambda(t_k)``."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if t_end is not None:
        cfg = cfg.with_updates(time={"t_end": t_end})
    cfg = cfg.with_updates(output={"write_snapshots": False})
    base, pert = _pmap(_trajectory, [(cfg, 0.0), (cfg, eps)])
    solver = cfg.solver_config()
    lam = tuple(continuous_dependence_lambda(a, b, solver) for a, b in zip(base, pert))
    return PerturbationResult(tuple(s.t for s in base), lam)
