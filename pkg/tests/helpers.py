"""Field builders shared by the tests."""

import numpy as np

from nschb.fields import Grid, MACVectorField, ScalarField


def streamfunction_velocity(grid: Grid, coeffs: np.ndarray) -> MACVectorField:
    """Divergence-free no-slip field from ``psi = sum c_kl sin^2-type modes``.

    ``psi = sin(pi x)^2 sin(pi y)^2 * sum c_kl cos(k pi x) cos(l pi y)`` vanishes
    with its normal derivative on the walls, so the curl is no-slip.
    """
    Xn, Yn = grid.node_coords()
    sx, sy = np.pi * Xn / grid.lx, np.pi * Yn / grid.ly
    poly = sum(coeffs[k, l] * np.cos(k * sx) * np.cos(l * sy)
               for k in range(coeffs.shape[0]) for l in range(coeffs.shape[1]))
    psi = np.sin(sx) ** 2 * np.sin(sy) ** 2 * poly
    psi[[0, -1], :] = 0.0
    psi[:, [0, -1]] = 0.0
    return MACVectorField.from_streamfunction(grid, psi)


def smooth_neumann(grid: Grid, coeffs: np.ndarray, bc: str = "neumann") -> ScalarField:
    """``sum c_kl cos(k pi x) cos(l pi y)``: smooth, grid-independent data."""
    X, Y = grid.cell_coords()
    vals = sum(coeffs[k, l] * np.cos(k * np.pi * X / grid.lx) * np.cos(l * np.pi * Y / grid.ly)
               for k in range(coeffs.shape[0]) for l in range(coeffs.shape[1]))
    return ScalarField(grid, vals, bc)


def smooth_dirichlet(grid: Grid, coeffs: np.ndarray) -> ScalarField:
    """``sum c_kl sin((k+1) pi x) sin((l+1) pi y)`` with homogeneous Dirichlet data."""
    X, Y = grid.cell_coords()
    vals = sum(coeffs[k, l] * np.sin((k + 1) * np.pi * X / grid.lx) * np.sin((l + 1) * np.pi * Y / grid.ly)
               for k in range(coeffs.shape[0]) for l in range(coeffs.shape[1]))
    return ScalarField(grid, vals, "dirichlet")


def random_noslip(grid: Grid, rng: np.random.Generator) -> MACVectorField:
    """Arbitrary face values with zero wall-normal components (not divergence-free)."""
    return MACVectorField(grid, rng.standard_normal(grid.xface_shape),
                          rng.standard_normal(grid.yface_shape)).with_noslip()


def kronecker_fields(n: int):
    """Asymmetric smooth ``(phi, u)`` used for the stress/transport identity."""
    g = Grid(n, n)
    X, Y = g.cell_coords()
    phi = ScalarField(g, 0.5 * np.cos(np.pi * X) * np.cos(np.pi * Y)
                      + 0.3 * np.cos(np.pi * X) ** 2 * np.cos(2 * np.pi * Y) + 0.1 * np.cos(3 * np.pi * Y))
    Xn, Yn = g.node_coords()
    psi = (np.sin(np.pi * Xn) * np.sin(np.pi * Yn)) ** 2 * np.exp(Xn + 0.5 * Yn)
    return phi, MACVectorField.from_streamfunction(g, psi)
