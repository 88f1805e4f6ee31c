import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import random_noslip
from nschb import operators as ops
from nschb.fields import DIRICHLET, NEUMANN, Grid, MACVectorField, ScalarField


def _orders(errors):
    return [np.log2(a / b) for a, b in zip(errors, errors[1:])]


def test_grad_of_constant_vanishes():
    g = Grid(8, 8)
    v = ops.grad(ScalarField(g, np.full(g.shape, 3.0)))
    assert np.max(np.abs(v.ux)) == 0.0 and np.max(np.abs(v.uy)) == 0.0


def test_grad_of_linear_is_exact_inside():
    g = Grid(10, 10)
    v = ops.grad(ScalarField.from_function(g, lambda x, y: x + 0 * y))
    assert np.allclose(v.ux[1:-1, :], 1.0, atol=1e-12)


def test_grad_cos_second_order():
    errs = []
    for n in (16, 32, 64):
        g = Grid(n, n)
        v = ops.grad(ScalarField.from_function(g, lambda x, y: np.cos(np.pi * x) + 0 * y))
        Xf, _ = g.xface_coords()
        errs.append(np.max(np.abs(v.ux - (-np.pi * np.sin(np.pi * Xf)))))
    assert min(_orders(errs)) > 1.9


@given(st.integers(4, 12), st.integers(4, 12), st.integers(0, 2**31), st.sampled_from([NEUMANN, DIRICHLET]))
def test_summation_by_parts(nx, ny, seed, bc):
    rng = np.random.default_rng(seed)
    g = Grid(nx, ny, 1.0 + rng.random(), 1.0)
    f = ScalarField(g, rng.standard_normal(g.shape), bc)
    u = random_noslip(g, rng)
    lhs = ops.inner(ops.grad(f), u)
    rhs = -ops.inner(f, ops.div(u))
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs), np.sqrt(ops.inner(u, u) * ops.inner(f, f)))


@pytest.mark.parametrize("bc", [NEUMANN, DIRICHLET])
def test_laplacian_is_div_grad(bc, rng):
    g = Grid(9, 7)
    f = ScalarField(g, rng.standard_normal(g.shape), bc)
    a = ops.laplacian(f).values
    b = ops.div(ops.grad(f)).values
    assert np.allclose(a, b, atol=1e-10 * np.max(np.abs(a)))


def test_laplacian_constant_vanishes():
    g = Grid(8, 8)
    assert np.max(np.abs(ops.laplacian(ScalarField(g, np.full(g.shape, 2.0))).values)) < 1e-10


@pytest.mark.parametrize("bc,func,eig", [
    (NEUMANN, lambda x, y: np.cos(np.pi * x) + 0 * y, np.pi**2),
    (DIRICHLET, lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y), 2 * np.pi**2),
])
def test_laplacian_eigenfunctions_second_order(bc, func, eig):
    errs = []
    for n in (16, 32, 64):
        f = ScalarField.from_function(Grid(n, n), func, bc)
        errs.append(np.max(np.abs(ops.laplacian(f).values + eig * f.values)))
    assert min(_orders(errs)) > 1.9


@pytest.mark.parametrize("scheme", [ops.UPWIND, ops.CENTERED])
def test_advect_zero_velocity_and_constant_field(scheme):
    from helpers import streamfunction_velocity

    g = Grid(12, 12)
    u = streamfunction_velocity(g, np.array([[1.0, 0.5], [0.2, -0.3]]))
    f = ScalarField.from_function(g, lambda x, y: np.exp(x * y))
    assert np.max(np.abs(ops.advect(f, MACVectorField.zeros(g), scheme).values)) == 0.0
    c = ScalarField(g, np.full(g.shape, 0.7))
    assert np.max(np.abs(ops.advect(c, u, scheme).values)) < 1e-12


def test_upwind_transport_creates_no_new_extrema():
    from helpers import streamfunction_velocity

    g = Grid(32, 32)
    u = streamfunction_velocity(g, np.array([[1.0]]))
    dt = 0.4 * g.h / u.max_abs()
    f = ScalarField.from_function(g, lambda x, y: np.exp(-40 * ((x - 0.3) ** 2 + (y - 0.5) ** 2)))
    hi, lo = f.values.max(), f.values.min()
    for _ in range(100):
        f = f.with_values(f.values + dt * ops.advect(f, u, ops.UPWIND).values)
        assert f.values.max() <= hi + 1e-12 and f.values.min() >= lo - 1e-12


def test_sym_grad_of_pure_shear():
    g = Grid(16, 16)
    u = MACVectorField.from_functions(g, lambda x, y: y, lambda x, y: 0 * x, enforce_noslip=False)
    D = ops.sym_grad(u)
    # wall-normal faces are treated as no-slip, so check away from x = 0, 1
    assert np.allclose(D.xx[1:-1, :], 0.0) and np.allclose(D.yy, 0.0)
    assert np.allclose(D.xy[2:-2, 2:-2], 0.5)


def test_sym_grad_of_zero():
    g = Grid(6, 6)
    D = ops.sym_grad(MACVectorField.zeros(g))
    assert not np.any(D.xx) and not np.any(D.yy) and not np.any(D.xy)


@given(st.integers(4, 16), st.integers(0, 2**31))
def test_korn_ratio_bounds(n, seed):
    from nschb.diagnostics import korn_ratio

    g = Grid(n, n)
    r = korn_ratio(random_noslip(g, np.random.default_rng(seed)))
    assert 1.0 - 1e-12 <= r <= np.sqrt(2.0) * (1.0 + 2.0 * g.h)


def test_grad_outer_is_symmetric_and_nonnegative(rng):
    g = Grid(8, 8)
    T = ops.grad_outer(ScalarField(g, rng.standard_normal(g.shape)))
    assert T.is_symmetric() and np.all(T.xx >= 0) and np.all(T.yy >= 0)


def test_viscous_matrix_symmetric_negative(rng):
    g = Grid(7, 6)
    nu_c = 1.0 + 0.1 * rng.random(g.shape)
    nu_n = 1.0 + 0.1 * rng.random(g.node_shape)
    V = ops.viscous_matrix(g, nu_c, nu_n)
    assert abs(V - V.T).max() < 1e-10 * abs(V).max()
    x = rng.standard_normal(V.shape[0])
    assert x @ (V @ x) < 0


def test_viscous_matrix_shift_and_scale(rng):
    g = Grid(6, 6)
    nu_c, nu_n = np.ones(g.shape), np.ones(g.node_shape)
    V = ops.viscous_matrix(g, nu_c, nu_n)
    A = ops.viscous_matrix(g, nu_c, nu_n, 1.0, -0.01)
    x = rng.standard_normal(V.shape[0])
    assert np.allclose(A @ x, x - 0.01 * (V @ x), rtol=1e-12, atol=1e-10)


def test_viscous_matrix_matches_divergence_of_stress(rng):
    """For constant viscosity the operator equals 2 nu div(D u)."""
    g = Grid(8, 8)
    u = random_noslip(g, rng)
    V = ops.viscous_matrix(g, np.full(g.shape, 0.5), np.full(g.node_shape, 0.5))
    D = ops.sym_grad(u)
    ref = ops.tensor_div(type(D)(g, 2 * 0.5 * D.xx, 2 * 0.5 * D.yy, 2 * 0.5 * D.xy))
    assert np.allclose(V @ u.interior(), ref.interior(), atol=1e-9 * np.abs(ref.interior()).max())
