"""Linear and nonlinear elliptic solves on the MAC grid.

Constant-coefficient operators on a rectangle are diagonalised by
trigonometric transforms:

* Neumann cell Laplacian: DCT-II in each direction
* Dirichlet cell Laplacian (anti-mirror ghosts): DST-II
* Laplacian on interior faces with wall values zero: DST-I

These give exact fast solves and serve as preconditioners for the
variable-coefficient problems.  ``SolverConfig.method`` selects between
transform-preconditioned conjugate gradients (``"cg"``), algebraic
multigrid from :mod:`pyamg` (``"multigrid"``) and sparse LU (``"direct"``).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft as sfft
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import operators as ops
from .errors import CompatibilityError, DomainError, NonConvergenceError
from .fields import DIRICHLET, NEUMANN, Grid, MACVectorField, ScalarField
from .potential import FP, PotentialParams, eval_potential, fp_inverse

CG = "cg"
MULTIGRID = "multigrid"
DIRECT = "direct"
_METHODS = (CG, MULTIGRID, DIRECT)


@dataclass(frozen=True)
class SolverConfig:
    rel_tol: float = 1e-10
    max_iter: int = 500
    method: str = CG

    def __post_init__(self):
        if not (0.0 < self.rel_tol <= 1e-4):
            raise ValueError(f"rel_tol must lie in (0, 1e-4], got {self.rel_tol}")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.method not in _METHODS:
            raise ValueError(f"unknown solver method {self.method!r}; choose from {_METHODS}")


@dataclass(frozen=True, eq=False)
class StokesSolution:
    u: MACVectorField
    p: ScalarField


# --- transform eigenvalues --------------------------------------------------


def _eig_neumann(n: int, h: float) -> np.ndarray:
    k = np.arange(n)
    return -(4.0 / h**2) * np.sin(np.pi * k / (2 * n)) ** 2


def _eig_dirichlet(n: int, h: float) -> np.ndarray:
    k = np.arange(n)
    return -(4.0 / h**2) * np.sin(np.pi * (k + 1) / (2 * n)) ** 2


def _eig_vertex(n: int, h: float) -> np.ndarray:
    # n cells, n - 1 interior vertices
    k = np.arange(n - 1)
    return -(4.0 / h**2) * np.sin(np.pi * (k + 1) / (2 * n)) ** 2


def _fwd(x, kinds):
    if kinds[0] == kinds[1]:
        f = sfft.dctn if kinds[0][0] == "c" else sfft.dstn
        return f(x, type=int(kinds[0][1]), norm="ortho")
    for axis, kind in enumerate(kinds):
        x = (sfft.dct if kind[0] == "c" else sfft.dst)(x, type=int(kind[1]), axis=axis, norm="ortho")
    return x


def _inv(x, kinds):
    if kinds[0] == kinds[1]:
        f = sfft.idctn if kinds[0][0] == "c" else sfft.idstn
        return f(x, type=int(kinds[0][1]), norm="ortho")
    for axis, kind in enumerate(kinds):
        x = (sfft.idct if kind[0] == "c" else sfft.idst)(x, type=int(kind[1]), axis=axis, norm="ortho")
    return x


@lru_cache(maxsize=None)
def laplacian_symbol(grid: Grid, location: str):
    """``(kinds, eigenvalues)`` for the Laplacian at ``location``.

    ``location`` is ``"neumann"`` or ``"dirichlet"`` for cell scalars, or
    ``"ux"`` / ``"uy"`` for interior velocity components.
    """
    nx, ny, dx, dy = grid.nx, grid.ny, grid.dx, grid.dy
    if location == NEUMANN:
        kinds, ex, ey = ("c2", "c2"), _eig_neumann(nx, dx), _eig_neumann(ny, dy)
    elif location == DIRICHLET:
        kinds, ex, ey = ("s2", "s2"), _eig_dirichlet(nx, dx), _eig_dirichlet(ny, dy)
    elif location == "ux":
        kinds, ex, ey = ("s1", "s2"), _eig_vertex(nx, dx), _eig_dirichlet(ny, dy)
    elif location == "uy":
        kinds, ex, ey = ("s2", "s1"), _eig_dirichlet(nx, dx), _eig_vertex(ny, dy)
    else:
        raise ValueError(f"unknown location {location!r}")
    lam = ex[:, None] + ey[None, :]
    lam.setflags(write=False)
    return kinds, lam


def transform_solve(rhs: np.ndarray, grid: Grid, location: str, shift: float = 0.0, scale: float = 1.0) -> np.ndarray:
    """Solve ``(shift I - scale L) x = rhs`` exactly by fast transforms.

    For the singular Neumann case with ``shift == 0`` the constant mode is
    set to zero, returning the mean-zero solution.
    """
    kinds, inv_symbol = _inverse_symbol(grid, location, float(shift), float(scale))
    return _inv(inv_symbol * _fwd(np.asarray(rhs, dtype=float), kinds), kinds)


@lru_cache(maxsize=256)
def _inverse_symbol(grid: Grid, location: str, shift: float, scale: float):
    kinds, lam = laplacian_symbol(grid, location)
    denom = shift - scale * lam
    safe = np.where(denom != 0.0, denom, 1.0)
    out = np.where(denom != 0.0, 1.0 / safe, 0.0)
    out.setflags(write=False)
    return kinds, out


def apply_symbol(x: np.ndarray, grid: Grid, location: str, func) -> np.ndarray:
    """Apply the Fourier multiplier ``func(lam)`` of the Laplacian at ``location``."""
    kinds, lam = laplacian_symbol(grid, location)
    return _inv(func(lam) * _fwd(np.asarray(x, dtype=float), kinds), kinds)


# --- generic SPD machinery --------------------------------------------------


def _cg(A, b, cfg: SolverConfig, M=None, x0=None, what="linear solve"):
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b)
    it = [0]

    def cb(_):
        it[0] += 1

    x, info = spla.cg(A, b, x0=x0, rtol=cfg.rel_tol, atol=0.0, maxiter=cfg.max_iter, M=M, callback=cb)
    res = np.linalg.norm(b - A @ x) / bnorm
    if info != 0 and res > cfg.rel_tol * 10:
        raise NonConvergenceError(f"{what}: CG stopped at relative residual {res:.3e}", res, it[0])
    return x


def _amg_solve(A, b, cfg: SolverConfig, what="linear solve"):
    import pyamg

    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b)
    ml = pyamg.smoothed_aggregation_solver(sp.csr_matrix(A))
    residuals: list[float] = []
    x = ml.solve(b, tol=cfg.rel_tol, maxiter=cfg.max_iter, accel="cg", residuals=residuals)
    res = np.linalg.norm(b - A @ x) / bnorm
    if res > cfg.rel_tol * 10:
        raise NonConvergenceError(f"{what}: multigrid stopped at relative residual {res:.3e}", res, len(residuals))
    return x


def _check_residual(A, x, b, cfg, what):
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return
    res = np.linalg.norm(b - A @ x) / bnorm
    if not np.isfinite(res) or res > max(cfg.rel_tol, 1e-10) * 10:
        raise NonConvergenceError(f"{what}: direct solve residual {res:.3e}", res, 1)


def solve_spd(A, b: np.ndarray, cfg: SolverConfig, precond=None, what: str = "linear solve",
              x0: np.ndarray | None = None) -> np.ndarray:
    """Solve a symmetric positive definite sparse system with ``cfg.method``.

    ``precond`` is an optional callable used as the CG preconditioner and
    ``x0`` an optional starting vector for CG.
    """
    if cfg.method == DIRECT:
        x = spla.spsolve(sp.csc_matrix(A), b)
        _check_residual(A, x, b, cfg, what)
        return x
    if cfg.method == MULTIGRID:
        return _amg_solve(A, b, cfg, what)
    M = None
    if precond is not None:
        M = spla.LinearOperator(A.shape, matvec=precond, dtype=float)
    return _cg(A, b, cfg, M=M, x0=x0, what=what)


# --- Neumann Poisson --------------------------------------------------------


@lru_cache(maxsize=None)
def _neumann_bordered_lu(grid: Grid):
    A = -ops.laplacian_matrix(grid, NEUMANN)
    n = A.shape[0]
    e = np.ones((n, 1))
    K = sp.bmat([[A, sp.csr_matrix(e)], [sp.csr_matrix(e.T), None]], format="csc")
    return spla.splu(K)


def _check_mean_zero(g: np.ndarray, what: str):
    scale = max(float(np.sqrt(np.mean(g**2))), np.finfo(float).tiny)
    if abs(float(np.mean(g))) > 1e-10 * scale:
        raise CompatibilityError(f"{what}: right-hand side has mean {float(np.mean(g))!r}, expected zero")


def solve_neumann_poisson(g: ScalarField, cfg: SolverConfig = SolverConfig()) -> ScalarField:
    """``u = A0^{-1} g``: ``-Lap u = g``, ``du/dn = 0``, ``mean(u) = 0``."""
    grid = g.grid
    rhs = g.values
    _check_mean_zero(rhs, "Neumann Poisson")
    rhs = rhs - rhs.mean()
    if not np.any(rhs):
        return ScalarField.zeros(grid, NEUMANN)
    A = -ops.laplacian_matrix(grid, NEUMANN)
    b = rhs.ravel()
    if cfg.method == DIRECT:
        sol = _neumann_bordered_lu(grid).solve(np.append(b, 0.0))
        x = sol[:-1]
        _check_residual(A, x, b, cfg, "Neumann Poisson")
    elif cfg.method == MULTIGRID:
        # pin the first cell: the reduced matrix is SPD and the dropped
        # equation holds automatically by compatibility
        x = np.zeros_like(b)
        x[1:] = _amg_solve(A[1:, 1:], b[1:], cfg, "Neumann Poisson")
    else:
        def prec(r):
            r2 = r.reshape(grid.shape)
            return transform_solve(r2 - r2.mean(), grid, NEUMANN, 0.0, 1.0).ravel()

        x = _cg(A, b, cfg, M=spla.LinearOperator(A.shape, matvec=prec, dtype=float), x0=prec(b),
                what="Neumann Poisson")
    x = x.reshape(grid.shape)
    return ScalarField(grid, x - x.mean(), NEUMANN)


# --- variable-coefficient Dirichlet diffusion -------------------------------


@lru_cache(maxsize=None)
def _diffusion_assembler(grid: Grid, bc: str):
    Gx, Gy = ops.grad_matrices(grid, bc)
    Dx, Dy = ops.div_matrices(grid)
    return ops.WeightedProduct(sp.hstack([Dx, Dy]), sp.vstack([Gx, Gy]))


def diffusion_matrix(grid: Grid, kx: np.ndarray, ky: np.ndarray, bc: str = DIRICHLET,
                     shift: float = 0.0, scale: float = 1.0) -> sp.csr_matrix:
    """``div(k grad .)`` with face coefficients ``kx`` (x-faces) and ``ky`` (y-faces).

    With ``shift``/``scale`` returns ``shift I + scale div(k grad .)``.
    """
    w = np.concatenate([np.ravel(kx), np.ravel(ky)])
    return _diffusion_assembler(grid, bc)(w, shift, scale)


def implicit_diffusion_solve(grid: Grid, rhs: np.ndarray, kx: np.ndarray, ky: np.ndarray, dt: float,
                             cfg: SolverConfig, bc: str = DIRICHLET) -> np.ndarray:
    """Solve ``(I - dt div(k grad)) x = rhs``; the matrix is an M-matrix."""
    A = diffusion_matrix(grid, kx, ky, bc, 1.0, -dt)
    kbar = 0.5 * (float(np.mean(kx)) + float(np.mean(ky)))

    def prec(r):
        return transform_solve(r.reshape(grid.shape), grid, bc, 1.0, dt * kbar).ravel()

    x = solve_spd(A, np.ravel(rhs), cfg, precond=prec, what="implicit diffusion")
    return x.reshape(grid.shape)


# --- Stokes -----------------------------------------------------------------


@lru_cache(maxsize=None)
def _stokes_sf(grid: Grid):
    """Streamfunction form ``C^T A C`` of the Stokes operator and its LU."""
    C = ops.curl_matrix(grid)
    A = -ops.velocity_laplacian_matrix(grid)
    K = (C.T @ A @ C).tocsc()
    M = (C.T @ C).tocsc()
    return C, K, M, spla.splu(K)


def _pressure_from_residual(grid: Grid, r: np.ndarray) -> np.ndarray:
    """Mean-zero ``p`` with ``G p = r`` for ``r`` orthogonal to divergence-free fields."""
    q = ops.velocity_div_matrix(grid) @ r
    # D G p = D r, with D G the Neumann Laplacian
    return transform_solve(q.reshape(grid.shape), grid, NEUMANN, 0.0, -1.0).ravel()


def velocity_transform_solve(grid: Grid, r: np.ndarray, shift: float = 0.0, scale: float = 1.0) -> np.ndarray:
    """Solve ``(shift I - scale L_v) x = r`` for interior velocity vectors."""
    nxi = (grid.nx - 1) * grid.ny
    rx = r[:nxi].reshape(grid.nx - 1, grid.ny)
    ry = r[nxi:].reshape(grid.nx, grid.ny - 1)
    xx = transform_solve(rx, grid, "ux", shift, scale)
    xy = transform_solve(ry, grid, "uy", shift, scale)
    return np.concatenate([xx.ravel(), xy.ravel()])


def _stokes_interior(grid: Grid, f: np.ndarray, cfg: SolverConfig):
    """Return interior velocity and mean-zero pressure for ``-L_v u + G p = f``."""
    nc = grid.nx * grid.ny
    if cfg.method == DIRECT:
        C, _, _, lu = _stokes_sf(grid)
        u = C @ lu.solve(C.T @ f)
        p = _pressure_from_residual(grid, f + ops.velocity_laplacian_matrix(grid) @ u)
        return u, p - p.mean()
    G = ops.velocity_grad_matrix(grid)

    def ainv(r):
        return velocity_transform_solve(grid, r)

    def schur(q):
        return G.T @ ainv(G @ q)

    S = spla.LinearOperator((nc, nc), matvec=schur, dtype=float)
    b = G.T @ ainv(f)
    b -= b.mean()
    if np.linalg.norm(b) == 0.0:
        p = np.zeros(nc)
    else:
        p = _cg(S, b, cfg, what="Stokes pressure Schur complement")
    p -= p.mean()
    u = ainv(f - G @ p)
    return u, p


def solve_stokes(g: MACVectorField, cfg: SolverConfig = SolverConfig()) -> StokesSolution:
    """Solve ``-Lap u + grad p = g``, ``div u = 0``, ``u = 0`` on the wall, ``mean p = 0``."""
    grid = g.grid
    if not g.is_finite():
        raise ValueError("Stokes right-hand side is not finite")
    u, p = _stokes_interior(grid, g.interior(), cfg)
    return StokesSolution(MACVectorField.from_interior(grid, u), ScalarField(grid, p.reshape(grid.shape), NEUMANN))


def vsigma_dual_norm(g: MACVectorField, cfg: SolverConfig = SolverConfig()) -> float:
    """``||grad S^{-1} g||``, the dual norm on divergence-free fields."""
    u = solve_stokes(g, cfg).u
    T = ops.velocity_gradient(u)
    return float(np.sqrt(ops.inner(T, T)))


def v0_dual_norm(f: ScalarField, cfg: SolverConfig = SolverConfig()) -> float:
    """``||grad A0^{-1} f||`` for mean-zero ``f``."""
    u = solve_neumann_poisson(f, cfg)
    v = ops.grad(u)
    return float(np.sqrt(ops.inner(v, v)))


@dataclass(frozen=True, eq=False)
class StokesModes:
    grid: Grid
    eigenvalues: np.ndarray
    vectors: np.ndarray  # interior unknowns, one column per mode, unit L2 norm

    @property
    def m(self) -> int:
        return len(self.eigenvalues)

    def mode(self, i: int) -> MACVectorField:
        return MACVectorField.from_interior(self.grid, self.vectors[:, i])


MAX_MODES = 64


@lru_cache(maxsize=16)
def _eigenmodes_cached(grid: Grid, m: int, tol: float):
    C, K, M, lu = _stokes_sf(grid)
    n = K.shape[0]
    OPinv = spla.LinearOperator((n, n), matvec=lu.solve, dtype=float)
    v0 = np.random.default_rng(12345).standard_normal(n)
    try:
        lam, psi = spla.eigsh(K, k=m, M=M, sigma=0.0, which="LM", OPinv=OPinv, v0=v0, tol=tol)
    except spla.ArpackNoConvergence as exc:
        raise NonConvergenceError(f"Stokes eigensolver did not converge for m={m}") from exc
    order = np.argsort(lam)
    lam = lam[order]
    # psi is M-orthonormal, so C psi is Euclidean-orthonormal; rescale to the face inner product
    vecs = (C @ psi[:, order]) / np.sqrt(grid.cell_volume)
    for k in range(m):
        j = np.argmax(np.abs(vecs[:, k]))
        if vecs[j, k] < 0:
            vecs[:, k] = -vecs[:, k]
    lam.setflags(write=False)
    vecs.setflags(write=False)
    return lam, vecs


def stokes_eigenmodes(grid: Grid, m: int, cfg: SolverConfig = SolverConfig(), max_modes: int = MAX_MODES) -> StokesModes:
    """First ``m`` discrete Stokes eigenpairs, ascending and L2-orthonormal.

    The divergence-free space is parametrised by node streamfunctions,
    turning the constrained problem into the generalised symmetric problem
    ``C^T A C psi = lam C^T C psi``, solved by shift-invert Lanczos
    (ARPACK).  Results are cached per grid.
    """
    if not (1 <= m <= max_modes):
        raise ValueError(f"mode count must lie in [1, {max_modes}], got {m}")
    if m >= ops.n_velocity_unknowns(grid) - 1:
        raise ValueError("grid too coarse for the requested number of modes")
    lam, vecs = _eigenmodes_cached(grid, m, min(cfg.rel_tol, 1e-12))
    return StokesModes(grid, lam, vecs)


# --- singular elliptic problem ----------------------------------------------

def solve_singular_elliptic(mu_tilde: ScalarField, p: PotentialParams,
                            cfg: SolverConfig = SolverConfig(), phi0: ScalarField | None = None) -> ScalarField:
    """Solve ``-Lap phi + F'(phi) = mu_tilde`` with ``d phi/dn = 0``.

    Damped Newton iterating on ``w = F'(phi)``, so ``phi = tanh(w / A)``
    and the barrier at +-1 does not wreck the Jacobian's conditioning.  The
    step is halved until the residual norm decreases.  The residual is the
    same as for ``phi`` itself, and every iterate stays strictly inside
    (-1, 1) because :func:`fp_inverse` does.  Very large data push ``phi``
    to within a few ulps of +-1.  The default start is ``phi = 0``.
    """
    grid = mu_tilde.grid
    mu = mu_tilde.values
    if not np.all(np.isfinite(mu)):
        raise ValueError("mu_tilde is not finite")
    L = ops.laplacian_matrix(grid, NEUMANN)
    if phi0 is None:
        # phi = 0 is a far better start than F'^{-1}(mu): the latter sits
        # on the barrier wherever mu is large and forces tiny damped steps
        w = np.zeros(grid.shape)
    else:
        w = eval_potential(p, phi0.values, FP)

    def phi_of(x):
        return fp_inverse(p, x)

    def residual(x):
        ph = phi_of(x)
        return -(L @ ph.ravel()).reshape(grid.shape) + x - mu

    tol = cfg.rel_tol * max(1.0, float(np.max(np.abs(mu))))
    absL = abs(L)

    def roundoff(x):
        # rounding level of the residual evaluation; no tolerance can go below it
        ph = np.abs(phi_of(x)).ravel()
        return 16.0 * np.finfo(float).eps * float(np.max(absL @ ph + np.abs(x).ravel() + np.abs(mu).ravel()))

    r = residual(w)
    rn = float(np.max(np.abs(r)))
    r2 = float(np.linalg.norm(r))
    lin = cfg if cfg.method == MULTIGRID else SolverConfig(cfg.rel_tol, cfg.max_iter, DIRECT)
    for it in range(cfg.max_iter):
        if rn <= max(tol, roundoff(w)):
            break
        # J = I - L diag(d) with d = 1/F''; symmetrised as diag(d) J
        d = (1.0 - phi_of(w) ** 2).ravel() / p.A
        Dm = sp.diags(d)
        Js = (Dm - Dm @ L @ Dm).tocsr()
        step = solve_spd(Js, -d * r.ravel(), lin, what="singular Newton").reshape(grid.shape)
        t, stalled = 1.0, False
        while True:
            trial = w + t * step
            rt = residual(trial)
            rt2 = float(np.linalg.norm(rt))
            if rt2 < r2 or float(np.max(np.abs(rt))) <= tol:
                break
            t *= 0.5
            if t < 1e-14:
                if rn > 100.0 * roundoff(w):
                    raise NonConvergenceError("singular Newton: line search failed", rn, it)
                stalled = True  # stagnation at the rounding level
                break
        if stalled:
            break
        w, r, r2 = trial, rt, rt2
        rn = float(np.max(np.abs(r)))
    if rn > max(tol, 100.0 * roundoff(w)):
        raise NonConvergenceError(f"singular Newton did not converge: residual {rn:.3e}", rn, cfg.max_iter)
    phi = phi_of(w)
    assert_strict_bound(phi)
    return ScalarField(grid, phi, NEUMANN)


def assert_strict_bound(phi: np.ndarray, what: str = "phi"):
    if not np.all(np.abs(phi) < 1.0):
        raise DomainError(f"{what} left (-1, 1): max |phi| = {float(np.max(np.abs(phi)))!r}")
