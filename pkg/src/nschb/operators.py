"""Discrete differential operators on the MAC grid.

Every operator is assembled from two 1D building blocks, a face gradient
``g1`` and a cell divergence ``d1``, combined with Kronecker products.
Because ``d1`` is minus the transpose of the interior rows of ``g1`` under
the quadrature weights below, summation by parts holds to round-off and
``laplacian == div(grad(.))`` by construction.

Quadrature weights (``dx * dy`` times):

* cells: 1
* faces: 1 in the interior, 1/2 on the wall
* nodes: 1 in the interior, 1/2 on a wall, 1/4 at a corner

With these weights the discrete Dirichlet energy identity
``-<L f, f> = |grad f|^2`` holds exactly for both boundary conditions.
"""

from __future__ import annotations

import warnings
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .fields import DIRICHLET, NEUMANN, Grid, MACVectorField, ScalarField, TensorField

UPWIND = "upwind"
CENTERED = "centered"


# --- 1D building blocks -----------------------------------------------------


def g1(n: int, h: float, bc: str) -> sp.csr_matrix:
    """Face gradient of ``n`` cell values, shape ``(n + 1, n)``.

    Neumann wall rows are zero.  Dirichlet wall rows use the anti-mirrored
    ghost, giving ``+2 f[0] / h`` and ``-2 f[n-1] / h``.
    """
    rows = np.arange(1, n)
    data = np.concatenate([np.full(n - 1, -1.0 / h), np.full(n - 1, 1.0 / h)])
    r = np.concatenate([rows, rows])
    c = np.concatenate([rows - 1, rows])
    if bc == DIRICHLET:
        r = np.concatenate([r, [0, n]])
        c = np.concatenate([c, [0, n - 1]])
        data = np.concatenate([data, [2.0 / h, -2.0 / h]])
    elif bc != NEUMANN:
        raise ValueError(f"unknown boundary condition {bc!r}")
    return sp.csr_matrix((data, (r, c)), shape=(n + 1, n))


def d1(n: int, h: float) -> sp.csr_matrix:
    """Cell divergence of ``n + 1`` face values, shape ``(n, n + 1)``."""
    return sp.diags([np.full(n, -1.0 / h), np.full(n, 1.0 / h)], [0, 1], shape=(n, n + 1), format="csr")


def _eye(n: int):
    return sp.identity(n, format="csr")


def _interior_restriction(n_outer: int, n_inner: int, axis: int) -> sp.csr_matrix:
    """Selects faces ``1..n_outer-2`` along ``axis`` from a full face array.

    For x-faces ``axis=0`` with shape ``(n_outer, n_inner)``; for y-faces
    ``axis=1`` with shape ``(n_inner, n_outer)``.
    """
    sel = sp.identity(n_outer, format="csr")[1:-1, :]
    if axis == 0:
        return sp.kron(sel, _eye(n_inner), format="csr")
    return sp.kron(_eye(n_inner), sel, format="csr")


# --- assembled operators (cached per grid) ----------------------------------


@lru_cache(maxsize=None)
def grad_matrices(grid: Grid, bc: str):
    """``(Gx, Gy)`` mapping flattened cells to full x-faces and y-faces."""
    Gx = sp.kron(g1(grid.nx, grid.dx, bc), _eye(grid.ny), format="csr")
    Gy = sp.kron(_eye(grid.nx), g1(grid.ny, grid.dy, bc), format="csr")
    return Gx, Gy


@lru_cache(maxsize=None)
def div_matrices(grid: Grid):
    """``(Dx, Dy)`` mapping full face arrays to cells."""
    Dx = sp.kron(d1(grid.nx, grid.dx), _eye(grid.ny), format="csr")
    Dy = sp.kron(_eye(grid.nx), d1(grid.ny, grid.dy), format="csr")
    return Dx, Dy


@lru_cache(maxsize=None)
def laplacian_matrix(grid: Grid, bc: str) -> sp.csr_matrix:
    Gx, Gy = grad_matrices(grid, bc)
    Dx, Dy = div_matrices(grid)
    return (Dx @ Gx + Dy @ Gy).tocsr()


@lru_cache(maxsize=None)
def interior_prolongation(grid: Grid):
    """``(Px, Py)``: interior velocity unknowns to full face arrays (zero walls)."""
    Rx = _interior_restriction(grid.nx + 1, grid.ny, axis=0)
    Ry = _interior_restriction(grid.ny + 1, grid.nx, axis=1)
    return Rx.T.tocsr(), Ry.T.tocsr()


def n_velocity_unknowns(grid: Grid) -> int:
    return (grid.nx - 1) * grid.ny + grid.nx * (grid.ny - 1)


@lru_cache(maxsize=None)
def velocity_div_matrix(grid: Grid) -> sp.csr_matrix:
    """Divergence acting on interior velocity unknowns."""
    Dx, Dy = div_matrices(grid)
    Px, Py = interior_prolongation(grid)
    return sp.hstack([Dx @ Px, Dy @ Py], format="csr")


@lru_cache(maxsize=None)
def velocity_grad_matrix(grid: Grid) -> sp.csr_matrix:
    """Neumann pressure gradient restricted to interior velocity unknowns.

    Equals minus the transpose of :func:`velocity_div_matrix`.
    """
    return (-velocity_div_matrix(grid).T).tocsr()


@lru_cache(maxsize=None)
def curl_matrix(grid: Grid) -> sp.csr_matrix:
    """Discrete curl from interior-node streamfunctions to interior velocity.

    Its range is exactly the discretely divergence-free no-slip fields, so
    it parametrises that space without constraints.
    """
    nx, ny = grid.nx, grid.ny
    E = sp.kron(_eye(nx + 1)[:, 1:-1], _eye(ny + 1)[:, 1:-1], format="csr")
    dyn = sp.kron(_eye(nx + 1), d1(ny, grid.dy), format="csr")
    dxn = sp.kron(d1(nx, grid.dx), _eye(ny + 1), format="csr")
    Px, Py = interior_prolongation(grid)
    return sp.vstack([Px.T @ dyn @ E, -(Py.T @ dxn @ E)], format="csr")


@lru_cache(maxsize=None)
def strain_blocks(grid: Grid):
    """Velocity-gradient blocks acting on interior velocity unknowns.

    Returns ``(dxux, dyuy, dyux, dxuy)``; the first two land on cells, the
    last two on nodes.  Tangential no-slip enters through Dirichlet ghosts.
    """
    nx, ny = grid.nx, grid.ny
    Dx, Dy = div_matrices(grid)
    Px, Py = interior_prolongation(grid)
    dyux = sp.kron(_eye(nx + 1), g1(ny, grid.dy, DIRICHLET), format="csr") @ Px
    dxuy = sp.kron(g1(nx, grid.dx, DIRICHLET), _eye(ny + 1), format="csr") @ Py
    n_ux = Px.shape[1]
    dxux = sp.hstack([Dx @ Px, sp.csr_matrix((nx * ny, Py.shape[1]))], format="csr")
    dyuy = sp.hstack([sp.csr_matrix((nx * ny, n_ux)), Dy @ Py], format="csr")
    dyux = sp.hstack([dyux, sp.csr_matrix((dyux.shape[0], Py.shape[1]))], format="csr")
    dxuy = sp.hstack([sp.csr_matrix((dxuy.shape[0], n_ux)), dxuy], format="csr")
    return dxux, dyuy, dyux, dxuy


@lru_cache(maxsize=None)
def velocity_laplacian_matrix(grid: Grid) -> sp.csr_matrix:
    """Componentwise no-slip vector Laplacian on interior velocity unknowns."""
    dxux, dyuy, dyux, dxuy = strain_blocks(grid)
    # -grad^T W grad with cell weight 1 and node weights relative to dx dy
    Wn = sp.diags(node_weights(grid).ravel() / grid.cell_volume)
    L = -(dxux.T @ dxux + dyuy.T @ dyuy + dyux.T @ Wn @ dyux + dxuy.T @ Wn @ dxuy)
    return L.tocsr()


@lru_cache(maxsize=None)
def _tensor_div_blocks(grid: Grid):
    nx, ny = grid.nx, grid.ny
    # cell -> x-face and node -> x-face, wall rows zero
    cx = sp.kron(g1(nx, grid.dx, NEUMANN), _eye(ny), format="csr")
    mask = np.ones((nx + 1, ny))
    mask[0, :] = mask[-1, :] = 0
    nyx = sp.diags(mask.ravel()) @ sp.kron(_eye(nx + 1), d1(ny, grid.dy), format="csr")
    # node -> y-face and cell -> y-face
    nxy = sp.kron(d1(nx, grid.dx), _eye(ny + 1), format="csr")
    mask = np.ones((nx, ny + 1))
    mask[:, 0] = mask[:, -1] = 0
    nxy = (sp.diags(mask.ravel()) @ nxy).tocsr()
    cy = sp.kron(_eye(nx), g1(ny, grid.dy, NEUMANN), format="csr")
    return cx, nyx.tocsr(), nxy, cy


# --- weights and inner products ---------------------------------------------


@lru_cache(maxsize=None)
def _weights(grid: Grid):
    v = grid.cell_volume
    wc = np.full(grid.shape, v)
    wx = np.full(grid.xface_shape, v)
    wx[0, :] *= 0.5
    wx[-1, :] *= 0.5
    wy = np.full(grid.yface_shape, v)
    wy[:, 0] *= 0.5
    wy[:, -1] *= 0.5
    wn = np.full(grid.node_shape, v)
    wn[0, :] *= 0.5
    wn[-1, :] *= 0.5
    wn[:, 0] *= 0.5
    wn[:, -1] *= 0.5
    for w in (wc, wx, wy, wn):
        w.setflags(write=False)
    return wc, wx, wy, wn


def cell_weights(grid: Grid) -> np.ndarray:
    return _weights(grid)[0]


def xface_weights(grid: Grid) -> np.ndarray:
    return _weights(grid)[1]


def yface_weights(grid: Grid) -> np.ndarray:
    return _weights(grid)[2]


def node_weights(grid: Grid) -> np.ndarray:
    return _weights(grid)[3]


def inner(a, b) -> float:
    """Discrete L2 inner product of two fields of the same kind."""
    if isinstance(a, ScalarField):
        return float(np.sum(cell_weights(a.grid) * a.values * b.values))
    if isinstance(a, MACVectorField):
        g = a.grid
        return float(np.sum(xface_weights(g) * a.ux * b.ux) + np.sum(yface_weights(g) * a.uy * b.uy))
    if isinstance(a, TensorField):
        g = a.grid
        wc, wn = cell_weights(g), node_weights(g)
        return float(
            np.sum(wc * (a.xx * b.xx + a.yy * b.yy)) + np.sum(wn * (a.xy * b.xy + a.yx * b.yx))
        )
    raise TypeError(f"unsupported field type {type(a).__name__}")


# --- interpolation ----------------------------------------------------------


def _ghost_pad(values: np.ndarray, bc: str) -> np.ndarray:
    g = np.pad(values, 1, mode="symmetric")
    if bc == DIRICHLET:
        g[0, :] *= -1.0
        g[-1, :] *= -1.0
        g[:, 0] *= -1.0
        g[:, -1] *= -1.0
    return g


def cell_to_xface(values: np.ndarray, bc: str) -> np.ndarray:
    g = _ghost_pad(values, bc)[:, 1:-1]
    return 0.5 * (g[:-1, :] + g[1:, :])


def cell_to_yface(values: np.ndarray, bc: str) -> np.ndarray:
    g = _ghost_pad(values, bc)[1:-1, :]
    return 0.5 * (g[:, :-1] + g[:, 1:])


def cell_to_node(values: np.ndarray, bc: str) -> np.ndarray:
    g = _ghost_pad(values, bc)
    return 0.25 * (g[:-1, :-1] + g[1:, :-1] + g[:-1, 1:] + g[1:, 1:])


def xface_to_cell(ux: np.ndarray) -> np.ndarray:
    return 0.5 * (ux[:-1, :] + ux[1:, :])


def yface_to_cell(uy: np.ndarray) -> np.ndarray:
    return 0.5 * (uy[:, :-1] + uy[:, 1:])


# --- field-level operators --------------------------------------------------


def grad(f: ScalarField) -> MACVectorField:
    """Face gradient; wall-normal entries follow the ghost rule of ``f.bc``."""
    Gx, Gy = grad_matrices(f.grid, f.bc)
    v = f.values.ravel()
    return MACVectorField(
        f.grid,
        (Gx @ v).reshape(f.grid.xface_shape),
        (Gy @ v).reshape(f.grid.yface_shape),
        bc="noslip" if f.bc == NEUMANN else "gradient",
    )


def div(v: MACVectorField, bc: str = NEUMANN) -> ScalarField:
    Dx, Dy = div_matrices(v.grid)
    out = Dx @ v.ux.ravel() + Dy @ v.uy.ravel()
    return ScalarField(v.grid, out.reshape(v.grid.shape), bc)


def laplacian(f: ScalarField) -> ScalarField:
    L = laplacian_matrix(f.grid, f.bc)
    return f.with_values((L @ f.values.ravel()).reshape(f.grid.shape))


def advective_flux(f: ScalarField, v: MACVectorField, scheme: str = UPWIND):
    """Face fluxes ``(Fx, Fy)`` of ``f`` carried by ``v``; zero on walls."""
    vals = f.values
    ux, uy = v.ux, v.uy
    Fx = np.zeros_like(ux)
    Fy = np.zeros_like(uy)
    ui = ux[1:-1, :]
    vi = uy[:, 1:-1]
    if scheme == UPWIND:
        Fx[1:-1, :] = np.where(ui > 0, ui * vals[:-1, :], ui * vals[1:, :])
        Fy[:, 1:-1] = np.where(vi > 0, vi * vals[:, :-1], vi * vals[:, 1:])
    elif scheme == CENTERED:
        Fx[1:-1, :] = 0.5 * ui * (vals[:-1, :] + vals[1:, :])
        Fy[:, 1:-1] = 0.5 * vi * (vals[:, :-1] + vals[:, 1:])
    else:
        raise ValueError(f"unknown advection scheme {scheme!r}")
    return Fx, Fy


def advect(f: ScalarField, v: MACVectorField, scheme: str = UPWIND, div_tol: float = 1e-8) -> ScalarField:
    """Tendency ``-div(v f)`` in flux form.

    The wall fluxes are zero, so the cell sum of the result vanishes.  A
    warning is issued when ``v`` is noticeably compressible, since flux form
    then no longer equals ``-v . grad f``.
    """
    dv = div(v).values
    scale = max(v.max_abs() / v.grid.h, 1.0)
    if np.max(np.abs(dv)) > div_tol * scale:
        warnings.warn("advecting velocity is not discretely divergence-free", RuntimeWarning, stacklevel=2)
    Fx, Fy = advective_flux(f, v, scheme)
    g = f.grid
    out = -((Fx[1:, :] - Fx[:-1, :]) / g.dx + (Fy[:, 1:] - Fy[:, :-1]) / g.dy)
    return f.with_values(out)


def velocity_gradient(v: MACVectorField) -> TensorField:
    """Full gradient ``T[i][j] = d_j v_i``; diagonal at cells, shear at nodes."""
    g = v.grid
    dxux, dyuy, dyux, dxuy = strain_blocks(g)
    w = v.interior()
    return TensorField(
        g,
        (dxux @ w).reshape(g.shape),
        (dyuy @ w).reshape(g.shape),
        (dyux @ w).reshape(g.node_shape),
        (dxuy @ w).reshape(g.node_shape),
    )


def sym_grad(v: MACVectorField) -> TensorField:
    T = velocity_gradient(v)
    s = 0.5 * (T.xy + T.yx)
    return TensorField(v.grid, T.xx, T.yy, s, s.copy())


def curl_nodes(v: MACVectorField) -> np.ndarray:
    T = velocity_gradient(v)
    return T.yx - T.xy


def tensor_div(T: TensorField) -> MACVectorField:
    """Row-wise divergence of ``T`` onto faces; wall-normal faces are zero.

    Under the quadrature weights this is minus the adjoint of
    :func:`velocity_gradient` on no-slip fields.
    """
    g = T.grid
    cx, nyx, nxy, cy = _tensor_div_blocks(g)
    fx = cx @ T.xx.ravel() + nyx @ T.xy.ravel()
    fy = nxy @ T.yx.ravel() + cy @ T.yy.ravel()
    return MACVectorField(g, fx.reshape(g.xface_shape), fy.reshape(g.yface_shape))


def grad_outer(f: ScalarField) -> TensorField:
    """``grad f (x) grad f`` with the diagonal at cells and the shear at nodes.

    Squared face gradients are averaged onto cells; the shear product uses
    face gradients averaged onto nodes and vanishes on wall nodes.
    """
    g = f.grid
    v = grad(f)
    gx2 = 0.5 * (v.ux[:-1, :] ** 2 + v.ux[1:, :] ** 2)
    gy2 = 0.5 * (v.uy[:, :-1] ** 2 + v.uy[:, 1:] ** 2)
    gxn = np.zeros(g.node_shape)
    gyn = np.zeros(g.node_shape)
    gxn[:, 1:-1] = 0.5 * (v.ux[:, :-1] + v.ux[:, 1:])
    gyn[1:-1, :] = 0.5 * (v.uy[:-1, :] + v.uy[1:, :])
    xy = gxn * gyn
    return TensorField(g, gx2, gy2, xy, xy.copy())


# --- viscous operator -------------------------------------------------------


class WeightedProduct:
    """Fast assembly of ``L diag(w) R`` for fixed ``L``, ``R`` and varying ``w``.

    The sparsity pattern and the map from ``w`` to the nonzeros are built
    once, so each assembly costs one sparse mat-vec.
    """

    def __init__(self, L, R):
        Lc = sp.csc_matrix(L)
        Lc.sort_indices()
        R = sp.csr_matrix(R)
        R.sort_indices()
        n, K = Lc.shape
        m = R.shape[1]
        kL = np.repeat(np.arange(K), np.diff(Lc.indptr))
        cR = np.diff(R.indptr)[kL]
        e = np.repeat(np.arange(kL.size), cR)
        start = np.repeat(np.cumsum(cR) - cR, cR)
        ridx = R.indptr[kL[e]] + (np.arange(e.size) - start)
        rows, cols = Lc.indices[e], R.indices[ridx]
        lin = rows.astype(np.int64) * m + cols
        uniq, inv = np.unique(lin, return_inverse=True)
        self.P = sp.csr_matrix((Lc.data[e] * R.data[ridx], (inv.ravel(), kL[e])), shape=(uniq.size, K))
        self.indices = (uniq % m).astype(np.int32)
        self.indptr = np.searchsorted(uniq // m, np.arange(n + 1)).astype(np.int32)
        self.shape = (n, m)
        diag = np.flatnonzero(uniq // m == uniq % m)
        self.diag = diag if diag.size == min(n, m) else None

    def __call__(self, w: np.ndarray, shift: float = 0.0, scale: float = 1.0) -> sp.csr_matrix:
        """``shift I + scale L diag(w) R``; ``shift`` needs a full diagonal pattern."""
        data = scale * (self.P @ np.asarray(w, dtype=float))
        if shift:
            if self.diag is None:
                raise ValueError("pattern lacks a full diagonal")
            data[self.diag] += shift
        return sp.csr_matrix((data, self.indices, self.indptr), shape=self.shape)


@lru_cache(maxsize=None)
def _viscous_assembler(grid: Grid):
    dxux, dyuy, dyux, dxuy = strain_blocks(grid)
    S = sp.vstack([dxux, dyuy, 0.5 * (dyux + dxuy)], format="csr")
    return WeightedProduct(S.T, S)


def viscous_weights(grid: Grid, nu_cells: np.ndarray, nu_nodes: np.ndarray) -> np.ndarray:
    wc = 2.0 * np.asarray(nu_cells, dtype=float).ravel()
    wn = 4.0 * np.asarray(nu_nodes, dtype=float).ravel() * node_weights(grid).ravel() / grid.cell_volume
    return np.concatenate([wc, wc, wn])


def viscous_matrix(grid: Grid, nu_cells: np.ndarray, nu_nodes: np.ndarray,
                   shift: float = 0.0, scale: float = 1.0) -> sp.csr_matrix:
    """Matrix of ``div(2 nu D u)`` on interior velocity unknowns.

    Built as ``-(1/(dx dy)) S^T W S`` with ``S`` the strain map, so it is
    symmetric negative semidefinite and ``<V u, u> = -int 2 nu |D u|^2``.
    With ``shift``/``scale`` returns ``shift I + scale V`` directly.
    """
    return _viscous_assembler(grid)(viscous_weights(grid, nu_cells, nu_nodes), shift, -scale)


# --- momentum advection -----------------------------------------------------


def momentum_advection(a: MACVectorField, b: MACVectorField) -> MACVectorField:
    """Skew-symmetric discretisation of ``(a . grad) b``.

    Centered conservative fluxes on the staggered control volumes minus
    ``div_cv(a) b / 2``.  For no-slip ``a`` and ``b`` the result ``N``
    satisfies ``<N, b> = 0`` to round-off whatever ``div a`` is.
    """
    g = a.grid
    dx, dy = g.dx, g.dy
    ax, ay, bx, by = a.ux, a.uy, b.ux, b.uy

    # x-momentum on x-face control volumes
    Uc = 0.5 * (ax[:-1, :] + ax[1:, :])
    Bc = 0.5 * (bx[:-1, :] + bx[1:, :])
    Fe = Uc * Bc  # at cells
    Vn = np.zeros(g.node_shape)
    Vn[1:-1, :] = 0.5 * (ay[:-1, :] + ay[1:, :])
    bxg = np.pad(bx, ((0, 0), (1, 1)))
    bxg[:, 0] = -bx[:, 0]
    bxg[:, -1] = -bx[:, -1]
    Bn = 0.5 * (bxg[:, :-1] + bxg[:, 1:])  # bx at nodes
    Fn = Vn * Bn
    nx_ = np.zeros_like(bx)
    conv = (Fe[1:, :] - Fe[:-1, :]) / dx + (Fn[1:-1, 1:] - Fn[1:-1, :-1]) / dy
    dcv = (Uc[1:, :] - Uc[:-1, :]) / dx + (Vn[1:-1, 1:] - Vn[1:-1, :-1]) / dy
    nx_[1:-1, :] = conv - 0.5 * dcv * bx[1:-1, :]

    # y-momentum on y-face control volumes
    Vc = 0.5 * (ay[:, :-1] + ay[:, 1:])
    Cc = 0.5 * (by[:, :-1] + by[:, 1:])
    Gn = Vc * Cc
    Un = np.zeros(g.node_shape)
    Un[:, 1:-1] = 0.5 * (ax[:, :-1] + ax[:, 1:])
    byg = np.pad(by, ((1, 1), (0, 0)))
    byg[0, :] = -by[0, :]
    byg[-1, :] = -by[-1, :]
    Cn = 0.5 * (byg[:-1, :] + byg[1:, :])
    Hn = Un * Cn
    ny_ = np.zeros_like(by)
    conv = (Gn[:, 1:] - Gn[:, :-1]) / dy + (Hn[1:, 1:-1] - Hn[:-1, 1:-1]) / dx
    dcv = (Vc[:, 1:] - Vc[:, :-1]) / dy + (Un[1:, 1:-1] - Un[:-1, 1:-1]) / dx
    ny_[:, 1:-1] = conv - 0.5 * dcv * by[:, 1:-1]
    return MACVectorField(g, nx_, ny_)
