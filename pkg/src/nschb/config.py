"""Run configuration, read from TOML.

Sections: ``[grid] [time] [potential] [coefficients] [physics] [solvers]
[cahn_hilliard] [navier_stokes] [boussinesq] [galerkin] [initial] [output]``
plus a top-level ``mode`` key.  Every key has a default, so an empty file
is a valid configuration.
"""

from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from . import operators as ops
from .elliptic import SolverConfig
from .fields import Grid
from .potential import CoefficientModel, PhysicalParams, PotentialParams, TanhCoefficient

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

FULL = "full"
DECOUPLED_CH = "decoupled_ch"
GALERKIN = "galerkin"
MODES = (FULL, DECOUPLED_CH, GALERKIN)

PRESETS = ("zero", "strong_data", "weak_data", "spinodal", "snapshot")


@dataclass(frozen=True)
class GridSection:
    nx: int = 32
    ny: int = 32
    lx: float = 1.0
    ly: float = 1.0


@dataclass(frozen=True)
class TimeSection:
    dt: float = 1e-3
    t_end: float = 0.1
    snapshot_interval: int = 0  # steps between field snapshots; 0 writes only the final state
    report_interval: int = 1  # steps between energy/invariant rows


@dataclass(frozen=True)
class PotentialSection:
    A: float = 1.0
    B: float = 2.0


@dataclass(frozen=True)
class CoefficientSection:
    nu_base: float = 1.0
    nu_amp: float = 0.1
    kappa_base: float = 1.0
    kappa_amp: float = 0.1
    lambda0: float = 1.0
    a: float = 1.0
    b: float = 0.25


@dataclass(frozen=True)
class PhysicsSection:
    Ra: float = 1.0
    Ga: float = 0.0
    g: float = 1.0


@dataclass(frozen=True)
class SolverSection:
    rel_tol: float = 1e-10
    max_iter: int = 500
    method: str = "cg"


@dataclass(frozen=True)
class CHSection:
    scheme: str = ops.UPWIND
    newton_rel_tol: float = 1e-11
    newton_max_iter: int = 50


@dataclass(frozen=True)
class NSSection:
    viscous_treatment: str = "semi_implicit"
    rel_tol: float = 1e-12
    advection: bool = True
    capillary: bool = True


@dataclass(frozen=True)
class BoussinesqSection:
    scheme: str = ops.UPWIND
    rel_tol: float = 1e-14
    holder_beta: float = 0.25


@dataclass(frozen=True)
class GalerkinSection:
    enabled: bool = False
    m: int = 16


@dataclass(frozen=True)
class InitialSection:
    """Initial-condition preset and its knobs.

    ``phi_amplitude`` is ``max|phi0|`` for ``strong_data``, the noise
    amplitude for ``spinodal`` and the chemical-potential amplitude for
    ``weak_data``.
    """

    preset: str = "strong_data"
    phi_amplitude: float = 0.9
    phi_mean: float = 0.0
    theta_amplitude: float = 0.5
    velocity_amplitude: float = 0.0
    seed: int = 0
    path: str = ""


@dataclass(frozen=True)
class OutputSection:
    dir: str = "nschb_out"
    write_snapshots: bool = True


_SECTIONS = {
    "grid": GridSection,
    "time": TimeSection,
    "potential": PotentialSection,
    "coefficients": CoefficientSection,
    "physics": PhysicsSection,
    "solvers": SolverSection,
    "cahn_hilliard": CHSection,
    "navier_stokes": NSSection,
    "boussinesq": BoussinesqSection,
    "galerkin": GalerkinSection,
    "initial": InitialSection,
    "output": OutputSection,
}


@dataclass(frozen=True)
class SimConfig:
    mode: str = FULL
    grid: GridSection = field(default_factory=GridSection)
    time: TimeSection = field(default_factory=TimeSection)
    potential: PotentialSection = field(default_factory=PotentialSection)
    coefficients: CoefficientSection = field(default_factory=CoefficientSection)
    physics: PhysicsSection = field(default_factory=PhysicsSection)
    solvers: SolverSection = field(default_factory=SolverSection)
    cahn_hilliard: CHSection = field(default_factory=CHSection)
    navier_stokes: NSSection = field(default_factory=NSSection)
    boussinesq: BoussinesqSection = field(default_factory=BoussinesqSection)
    galerkin: GalerkinSection = field(default_factory=GalerkinSection)
    initial: InitialSection = field(default_factory=InitialSection)
    output: OutputSection = field(default_factory=OutputSection)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == GALERKIN and not self.galerkin.enabled:
            object.__setattr__(self, "galerkin", replace(self.galerkin, enabled=True))
        if not self.time.dt > 0:
            raise ValueError("dt must be positive")
        if not self.time.t_end >= self.time.dt:
            raise ValueError("t_end must be at least dt")
        if self.initial.preset not in PRESETS:
            raise ValueError(f"initial preset must be one of {PRESETS}, got {self.initial.preset!r}")
        if self.initial.preset == "strong_data" and not 0 <= self.initial.phi_amplitude < 1:
            raise ValueError("strong_data needs 0 <= phi_amplitude < 1")
        if not abs(self.initial.phi_mean) < 1:
            raise ValueError("initial mean of phi must lie in (-1, 1)")
        # validate the derived objects early
        self.grid_obj(), self.potential_params(), self.coefficient_model(), self.solver_config()

    # --- derived objects ----------------------------------------------------

    def grid_obj(self) -> Grid:
        return Grid(self.grid.nx, self.grid.ny, self.grid.lx, self.grid.ly)

    def potential_params(self) -> PotentialParams:
        return PotentialParams(self.potential.A, self.potential.B)

    def coefficient_model(self) -> CoefficientModel:
        c = self.coefficients
        return CoefficientModel(
            nu=TanhCoefficient(c.nu_base, c.nu_amp),
            kappa=TanhCoefficient(c.kappa_base, c.kappa_amp),
            lambda0=c.lambda0, a=c.a, b=c.b,
        )

    def physical_params(self) -> PhysicalParams:
        return PhysicalParams(self.physics.Ra, self.physics.Ga, self.physics.g)

    def solver_config(self) -> SolverConfig:
        s = self.solvers
        return SolverConfig(s.rel_tol, s.max_iter, s.method)

    @property
    def n_steps(self) -> int:
        return int(round(self.time.t_end / self.time.dt))

    # --- (de)serialisation --------------------------------------------------

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SimConfig":
        data = dict(data)
        kw = {}
        if "mode" in data:
            kw["mode"] = data.pop("mode")
        for name, section in _SECTIONS.items():
            raw = data.pop(name, {})
            known = {f.name for f in fields(section)}
            unknown = set(raw) - known
            if unknown:
                raise ValueError(f"unknown keys in [{name}]: {sorted(unknown)}")
            kw[name] = section(**raw)
        if data:
            raise ValueError(f"unknown config sections: {sorted(data)}")
        return cls(**kw)

    @classmethod
    def from_toml(cls, path) -> "SimConfig":
        with Path(path).open("rb") as fh:
            return cls.from_dict(tomllib.load(fh))

    def with_updates(self, **sections) -> "SimConfig":
        """Copy with section fields replaced, e.g. ``with_updates(grid={"nx": 64})``."""
        kw = {}
        for name, upd in sections.items():
            if name == "mode":
                kw["mode"] = upd
            else:
                kw[name] = replace(getattr(self, name), **upd)
        return replace(self, **kw)
