"""Discrete norms and seminorms by midpoint quadrature.

Scalars are measured with cell weights, face gradients with face weights,
and mixed second derivatives with node weights (see :mod:`.operators`).
"""

from __future__ import annotations

import numpy as np

from . import operators as ops
from .fields import DIRICHLET, MACVectorField, ScalarField

L2 = "L2"
L4 = "L4"
LINF = "Linf"
H1SEMI = "H1semi"
H2 = "H2"
HOLDER = "HolderSemi"
W14 = "W14"

#: grids with at most this many cells use exhaustive pair search
HOLDER_EXHAUSTIVE_CELLS = 48 * 48


def _lp(weighted_pairs, p: float) -> float:
    if np.isinf(p):
        return float(max((np.max(np.abs(v)) if v.size else 0.0) for _, v in weighted_pairs))
    total = sum(float(np.sum(w * np.abs(v) ** p)) for w, v in weighted_pairs)
    return total ** (1.0 / p)


def lp_norm(f, p: float = 2.0) -> float:
    if isinstance(f, ScalarField):
        return _lp([(ops.cell_weights(f.grid), f.values)], p)
    if isinstance(f, MACVectorField):
        g = f.grid
        if np.isinf(p):
            return f.max_abs()
        # pointwise |u| needs a common location: interpolate to cells
        ucx = ops.xface_to_cell(f.ux)
        ucy = ops.yface_to_cell(f.uy)
        if p == 2:
            return _lp([(ops.xface_weights(g), f.ux), (ops.yface_weights(g), f.uy)], 2.0)
        mag = np.sqrt(ucx**2 + ucy**2)
        return _lp([(ops.cell_weights(g), mag)], p)
    raise TypeError(f"unsupported field type {type(f).__name__}")


def _scalar_grad_parts(f: ScalarField):
    v = ops.grad(f)
    g = f.grid
    return [(ops.xface_weights(g), v.ux), (ops.yface_weights(g), v.uy)]


def _scalar_hessian_parts(f: ScalarField):
    """``(weight, values)`` pairs for f_xx, f_yy (cells) and f_xy (nodes, twice)."""
    g = f.grid
    v = ops.grad(f)
    Dx, Dy = ops.div_matrices(g)
    fxx = (Dx @ v.ux.ravel()).reshape(g.shape)
    fyy = (Dy @ v.uy.ravel()).reshape(g.shape)
    gx = ops.g1(g.nx, g.dx, f.bc)
    fxy = (gx @ v.uy)  # x-difference of y-face gradient, lands on nodes
    wc, wn = ops.cell_weights(g), ops.node_weights(g)
    return [(wc, fxx), (wc, fyy), (2.0 * wn, fxy)]


def h1_seminorm(f) -> float:
    if isinstance(f, ScalarField):
        return _lp(_scalar_grad_parts(f), 2.0)
    if isinstance(f, MACVectorField):
        T = ops.velocity_gradient(f)
        return float(np.sqrt(ops.inner(T, T)))
    raise TypeError(f"unsupported field type {type(f).__name__}")


def h2_norm(f) -> float:
    """Full H2 norm: L2 plus first and second derivative contributions."""
    if isinstance(f, ScalarField):
        sq = lp_norm(f) ** 2 + h1_seminorm(f) ** 2 + _lp(_scalar_hessian_parts(f), 2.0) ** 2
        return float(np.sqrt(sq))
    if isinstance(f, MACVectorField):
        g = f.grid
        ux = ScalarField(g, ops.xface_to_cell(f.ux), DIRICHLET)
        uy = ScalarField(g, ops.yface_to_cell(f.uy), DIRICHLET)
        second = sum(_lp(_scalar_hessian_parts(c), 2.0) ** 2 for c in (ux, uy))
        return float(np.sqrt(lp_norm(f) ** 2 + h1_seminorm(f) ** 2 + second))
    raise TypeError(f"unsupported field type {type(f).__name__}")


def w14_norm(f: ScalarField) -> float:
    """``||f||_{L4} + ||grad f||_{L4}`` with the gradient taken on faces."""
    g = f.grid
    v = ops.grad(f)
    gx = ops.xface_to_cell(v.ux)
    gy = ops.yface_to_cell(v.uy)
    grad4 = _lp([(ops.cell_weights(g), np.sqrt(gx**2 + gy**2))], 4.0)
    return lp_norm(f, 4.0) + grad4


def _pair_max(P: np.ndarray, vals: np.ndarray, Q: np.ndarray, qvals: np.ndarray, gamma: float, chunk: int = 512) -> float:
    best = 0.0
    for s in range(0, len(P), chunk):
        d = np.sqrt(((P[s:s + chunk, None, :] - Q[None, :, :]) ** 2).sum(-1))
        num = np.abs(vals[s:s + chunk, None] - qvals[None, :])
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(d > 0, num / d**gamma, 0.0)
        best = max(best, float(r.max()))
    return best


def holder_seminorm(f: ScalarField, gamma: float, n_random: int = 200_000, seed: int = 0) -> float:
    """Discrete ``C^gamma`` seminorm ``max |f(x)-f(y)| / |x-y|^gamma`` over cell centres.

    Exhaustive for grids of at most 48x48 cells.  Larger grids combine an
    exhaustive search on a strided sub-grid, all pairs within a 3-cell
    neighbourhood, and ``n_random`` seeded random pairs.
    """
    if not (0.0 < gamma < 1.0):
        raise ValueError(f"Holder exponent must lie in (0, 1), got {gamma}")
    g = f.grid
    X, Y = g.cell_coords()
    P = np.column_stack([X.ravel(), Y.ravel()])
    vals = f.values.ravel()
    if g.nx * g.ny <= HOLDER_EXHAUSTIVE_CELLS:
        return _pair_max(P, vals, P, vals, gamma)

    stride = int(np.ceil(np.sqrt(g.nx * g.ny / HOLDER_EXHAUSTIVE_CELLS)))
    sub = np.zeros(g.shape, dtype=bool)
    sub[::stride, ::stride] = True
    idx = np.flatnonzero(sub.ravel())
    best = _pair_max(P[idx], vals[idx], P[idx], vals[idx], gamma)

    F = f.values
    for di in range(0, 4):
        for dj in range(-3, 4):
            if di == 0 and dj <= 0:
                continue
            lo, hi = max(0, -dj), g.ny - max(0, dj)
            a = F[: g.nx - di, lo:hi]
            b = F[di:, lo + dj: hi + dj]
            dist = np.hypot(di * g.dx, dj * g.dy)
            best = max(best, float(np.max(np.abs(a - b))) / dist**gamma)

    rng = np.random.default_rng(seed)
    i = rng.integers(0, len(vals), n_random)
    j = rng.integers(0, len(vals), n_random)
    d = np.hypot(P[i, 0] - P[j, 0], P[i, 1] - P[j, 1])
    ok = d > 0
    if np.any(ok):
        best = max(best, float(np.max(np.abs(vals[i[ok]] - vals[j[ok]]) / d[ok] ** gamma)))
    return best


def norm(f, kind: str, gamma: float | None = None) -> float:
    """Dispatch on ``kind`` in ``{L2, L4, Linf, H1semi, H2, W14, HolderSemi}``."""
    if kind == L2:
        return lp_norm(f, 2.0)
    if kind == L4:
        return lp_norm(f, 4.0)
    if kind == LINF:
        return lp_norm(f, np.inf)
    if kind == H1SEMI:
        return h1_seminorm(f)
    if kind == H2:
        return h2_norm(f)
    if kind == W14:
        return w14_norm(f)
    if kind == HOLDER:
        if gamma is None:
            raise ValueError("HolderSemi needs gamma")
        return holder_seminorm(f, gamma)
    raise ValueError(f"unknown norm kind {kind!r}")
