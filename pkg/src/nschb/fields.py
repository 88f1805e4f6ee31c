"""Grid and field containers on a staggered (MAC) rectangle.

Layout, with ``i`` the x index and ``j`` the y index:

* cell centres ``((i + 1/2) dx, (j + 1/2) dy)``, arrays of shape ``(nx, ny)``
* x-faces ``(i dx, (j + 1/2) dy)``, shape ``(nx + 1, ny)``
* y-faces ``((i + 1/2) dx, j dy)``, shape ``(nx, ny + 1)``
* nodes ``(i dx, j dy)``, shape ``(nx + 1, ny + 1)``

Scalars (phi, mu, theta, p) live at cell centres, velocity components on
faces.  Flattening always uses C order, so x is the slow index.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import GridMismatchError

NEUMANN = "neumann"
DIRICHLET = "dirichlet"
_BCS = (NEUMANN, DIRICHLET)


@dataclass(frozen=True)
class Grid:
    nx: int
    ny: int
    lx: float = 1.0
    ly: float = 1.0

    def __post_init__(self):
        if self.nx < 4 or self.ny < 4:
            raise ValueError(f"grid needs at least 4 cells per axis, got {self.nx}x{self.ny}")
        if not (self.lx > 0 and self.ly > 0):
            raise ValueError("domain lengths must be positive")

    @property
    def dx(self) -> float:
        return self.lx / self.nx

    @property
    def dy(self) -> float:
        return self.ly / self.ny

    @property
    def h(self) -> float:
        return max(self.dx, self.dy)

    @property
    def area(self) -> float:
        return self.lx * self.ly

    @property
    def cell_volume(self) -> float:
        return self.dx * self.dy

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def xface_shape(self) -> tuple[int, int]:
        return (self.nx + 1, self.ny)

    @property
    def yface_shape(self) -> tuple[int, int]:
        return (self.nx, self.ny + 1)

    @property
    def node_shape(self) -> tuple[int, int]:
        return (self.nx + 1, self.ny + 1)

    def xc(self) -> np.ndarray:
        return (np.arange(self.nx) + 0.5) * self.dx

    def yc(self) -> np.ndarray:
        return (np.arange(self.ny) + 0.5) * self.dy

    def xn(self) -> np.ndarray:
        return np.arange(self.nx + 1) * self.dx

    def yn(self) -> np.ndarray:
        return np.arange(self.ny + 1) * self.dy

    def cell_coords(self):
        return np.meshgrid(self.xc(), self.yc(), indexing="ij")

    def xface_coords(self):
        return np.meshgrid(self.xn(), self.yc(), indexing="ij")

    def yface_coords(self):
        return np.meshgrid(self.xc(), self.yn(), indexing="ij")

    def node_coords(self):
        return np.meshgrid(self.xn(), self.yn(), indexing="ij")

    def refine(self, factor: int = 2) -> "Grid":
        return Grid(self.nx * factor, self.ny * factor, self.lx, self.ly)


def _check_bc(bc: str) -> str:
    if bc not in _BCS:
        raise ValueError(f"unknown boundary condition {bc!r}")
    return bc


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Cell-centred scalar with a homogeneous boundary condition."""

    grid: Grid
    values: np.ndarray
    bc: str = NEUMANN

    def __post_init__(self):
        _check_bc(self.bc)
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.grid.shape:
            raise ValueError(f"expected shape {self.grid.shape}, got {vals.shape}")
        object.__setattr__(self, "values", vals)

    @classmethod
    def zeros(cls, grid: Grid, bc: str = NEUMANN) -> "ScalarField":
        return cls(grid, np.zeros(grid.shape), bc)

    @classmethod
    def from_function(cls, grid: Grid, func, bc: str = NEUMANN) -> "ScalarField":
        X, Y = grid.cell_coords()
        return cls(grid, np.broadcast_to(func(X, Y), grid.shape).astype(float), bc)

    def with_values(self, values) -> "ScalarField":
        return ScalarField(self.grid, values, self.bc)

    def mean(self) -> float:
        return float(self.values.mean())

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def __add__(self, other):
        if isinstance(other, ScalarField):
            _same_grid(self.grid, other.grid)
            return self.with_values(self.values + other.values)
        return self.with_values(self.values + other)

    def __sub__(self, other):
        if isinstance(other, ScalarField):
            _same_grid(self.grid, other.grid)
            return self.with_values(self.values - other.values)
        return self.with_values(self.values - other)

    def __mul__(self, other):
        if isinstance(other, ScalarField):
            _same_grid(self.grid, other.grid)
            return self.with_values(self.values * other.values)
        return self.with_values(self.values * other)

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_values(-self.values)


@dataclass(frozen=True, eq=False)
class MACVectorField:
    """Face-centred vector field.

    Velocities are no-slip: normal components on the walls are stored as
    exact zeros and tangential components vanish through anti-mirrored
    ghosts.  Gradients of Dirichlet scalars reuse this container and may
    carry nonzero wall-normal values; ``is_no_slip`` tells them apart.
    """

    grid: Grid
    ux: np.ndarray
    uy: np.ndarray
    bc: str = "noslip"

    def __post_init__(self):
        ux = np.asarray(self.ux, dtype=float)
        uy = np.asarray(self.uy, dtype=float)
        if ux.shape != self.grid.xface_shape or uy.shape != self.grid.yface_shape:
            raise ValueError("face arrays do not match the grid")
        object.__setattr__(self, "ux", ux)
        object.__setattr__(self, "uy", uy)

    @classmethod
    def zeros(cls, grid: Grid) -> "MACVectorField":
        return cls(grid, np.zeros(grid.xface_shape), np.zeros(grid.yface_shape))

    @classmethod
    def from_functions(cls, grid: Grid, fx, fy, enforce_noslip: bool = True) -> "MACVectorField":
        Xx, Yx = grid.xface_coords()
        Xy, Yy = grid.yface_coords()
        ux = np.broadcast_to(fx(Xx, Yx), grid.xface_shape).astype(float)
        uy = np.broadcast_to(fy(Xy, Yy), grid.yface_shape).astype(float)
        v = cls(grid, ux, uy)
        return v.with_noslip() if enforce_noslip else v

    @classmethod
    def from_streamfunction(cls, grid: Grid, psi_nodes: np.ndarray) -> "MACVectorField":
        """Discrete curl of a node streamfunction; exactly divergence-free."""
        psi = np.asarray(psi_nodes, dtype=float)
        if psi.shape != grid.node_shape:
            raise ValueError("streamfunction must live on nodes")
        ux = (psi[:, 1:] - psi[:, :-1]) / grid.dy
        uy = -(psi[1:, :] - psi[:-1, :]) / grid.dx
        return cls(grid, ux, uy)

    def with_noslip(self) -> "MACVectorField":
        ux = self.ux.copy()
        uy = self.uy.copy()
        ux[0, :] = ux[-1, :] = 0.0
        uy[:, 0] = uy[:, -1] = 0.0
        return MACVectorField(self.grid, ux, uy)

    def is_no_slip(self) -> bool:
        return bool(
            np.all(self.ux[0, :] == 0) and np.all(self.ux[-1, :] == 0)
            and np.all(self.uy[:, 0] == 0) and np.all(self.uy[:, -1] == 0)
        )

    def interior(self) -> np.ndarray:
        """Flattened interior unknowns ``[ux[1:-1, :], uy[:, 1:-1]]``."""
        return np.concatenate([self.ux[1:-1, :].ravel(), self.uy[:, 1:-1].ravel()])

    @classmethod
    def from_interior(cls, grid: Grid, vec: np.ndarray) -> "MACVectorField":
        nxi = (grid.nx - 1) * grid.ny
        ux = np.zeros(grid.xface_shape)
        uy = np.zeros(grid.yface_shape)
        ux[1:-1, :] = vec[:nxi].reshape(grid.nx - 1, grid.ny)
        uy[:, 1:-1] = vec[nxi:].reshape(grid.nx, grid.ny - 1)
        return cls(grid, ux, uy)

    def max_abs(self) -> float:
        return float(max(np.max(np.abs(self.ux)), np.max(np.abs(self.uy))))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.ux)) and np.all(np.isfinite(self.uy)))

    def __add__(self, other):
        _same_grid(self.grid, other.grid)
        return MACVectorField(self.grid, self.ux + other.ux, self.uy + other.uy, self.bc)

    def __sub__(self, other):
        _same_grid(self.grid, other.grid)
        return MACVectorField(self.grid, self.ux - other.ux, self.uy - other.uy, self.bc)

    def __mul__(self, c):
        return MACVectorField(self.grid, self.ux * c, self.uy * c, self.bc)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0


@dataclass(frozen=True, eq=False)
class TensorField:
    """2x2 tensor on the MAC grid: diagonal at cells, off-diagonal at nodes.

    ``xy`` holds the (1, 2) entry and ``yx`` the (2, 1) entry.
    """

    grid: Grid
    xx: np.ndarray
    yy: np.ndarray
    xy: np.ndarray
    yx: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.yx is None:
            object.__setattr__(self, "yx", np.array(self.xy, dtype=float))
        for name, shape in (("xx", self.grid.shape), ("yy", self.grid.shape),
                            ("xy", self.grid.node_shape), ("yx", self.grid.node_shape)):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != shape:
                raise ValueError(f"tensor component {name} has shape {arr.shape}, expected {shape}")
            object.__setattr__(self, name, arr)

    def is_symmetric(self, tol: float = 0.0) -> bool:
        return bool(np.max(np.abs(self.xy - self.yx)) <= tol)


def _same_grid(a: Grid, b: Grid):
    if a != b:
        raise GridMismatchError(f"grid mismatch: {a} vs {b}")


# --- snapshot I/O -----------------------------------------------------------

CSV_HEADER = "# nx,ny,lx,ly,bc,name,time"


def write_array_csv(path, grid: Grid, values: np.ndarray, bc: str, name: str, time: float):
    """Write one field as CSV.

    Line 1 is the column header ``# nx,ny,lx,ly,bc,name,time``, line 2 the
    matching metadata, then one row per y index (row-major, x fastest).
    Values use 17 significant digits so a read-back is bit-exact.
    """
    path = Path(path)
    meta = f"# {grid.nx},{grid.ny},{grid.lx!r},{grid.ly!r},{bc},{name},{float(time)!r}"
    rows = np.asarray(values, dtype=float).T
    with path.open("w") as fh:
        fh.write(CSV_HEADER + "\n")
        fh.write(meta + "\n")
        for row in rows:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def read_array_csv(path):
    """Inverse of :func:`write_array_csv`; returns ``(grid, values, bc, name, time)``."""
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise ValueError(f"{path}: not a field snapshot")
        meta = fh.readline().lstrip("#").strip().split(",")
        body = np.loadtxt(fh, delimiter=",", ndmin=2)
    nx, ny = int(meta[0]), int(meta[1])
    grid = Grid(nx, ny, float(meta[2]), float(meta[3]))
    return grid, body.T.copy(), meta[4], meta[5], float(meta[6])


def write_scalar(path, f: ScalarField, name: str, time: float = 0.0):
    write_array_csv(path, f.grid, f.values, f.bc, name, time)


def read_scalar(path) -> tuple[ScalarField, str, float]:
    grid, values, bc, name, time = read_array_csv(path)
    return ScalarField(grid, values, bc), name, time
