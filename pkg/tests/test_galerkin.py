import numpy as np
import pytest

from helpers import random_noslip, streamfunction_velocity
from nschb import operators as ops
from nschb.errors import NonConvergenceError
from nschb.fields import Grid, MACVectorField
from nschb.galerkin import GalerkinBasis, ModalForcing, galerkin_ns_step, galerkin_project, modal_energy
from nschb.potential import CoefficientModel, PhysicalParams

G = Grid(16, 16)


@pytest.fixture(scope="module")
def basis():
    return GalerkinBasis.build(G, 12)


def test_basis_is_orthonormal_and_divergence_free(basis):
    assert np.allclose(basis.gram(), np.eye(basis.m), atol=1e-10)
    for w in basis.modes:
        assert np.max(np.abs(ops.div(w).values)) < 1e-9 and w.is_no_slip()


def test_projecting_a_mode_gives_a_unit_vector(basis):
    c, um = galerkin_project(basis.mode(0), basis)
    e = np.zeros(basis.m)
    e[0] = 1.0
    assert np.allclose(c, e, atol=1e-10)
    assert np.allclose(um.ux, basis.mode(0).ux, atol=1e-10)


def test_orthogonal_complement_projects_to_zero(basis, rng):
    u = random_noslip(G, rng)
    c, um = galerkin_project(u, basis)
    r = u - um
    assert np.allclose(galerkin_project(r, basis)[0], 0.0, atol=1e-10)
    c2, um2 = galerkin_project(um, basis)
    assert np.allclose(c2, c, atol=1e-10)


def test_projection_error_nonincreasing_in_m(basis, rng):
    u = streamfunction_velocity(G, rng.standard_normal((3, 3)))
    errs = []
    for m in range(1, basis.m + 1):
        _, um = galerkin_project(u, basis.truncate(m))
        d = u - um
        errs.append(ops.inner(d, d))
    assert np.all(np.diff(errs) <= 1e-12)


def test_truncate_validates(basis):
    assert basis.truncate(3).m == 3
    with pytest.raises(ValueError):
        basis.truncate(0)
    with pytest.raises(ValueError):
        basis.truncate(basis.m + 1)


def test_project_rejects_other_grid(basis):
    with pytest.raises(ValueError):
        galerkin_project(MACVectorField.zeros(Grid(8, 8)), basis)


def test_zero_stays_zero(basis):
    c = galerkin_ns_step(np.zeros(basis.m), basis, 1e-3)
    assert not np.any(c)


def test_modal_decay_without_advection(basis):
    m = CoefficientModel.constant(0.1, 1.0)
    dt = 1e-3
    c = np.zeros(basis.m)
    c[0] = 1.0
    lam1 = basis.eigenvalues[0]
    n = 200
    for _ in range(n):
        c = galerkin_ns_step(c, basis, dt, m=m, advection=False)
    assert c[0] == pytest.approx(np.exp(-0.1 * lam1 * n * dt), rel=0.01)
    assert np.allclose(c[1:], 0.0, atol=1e-10)


def test_advection_does_no_work(basis, rng):
    """With viscosity and forcing absent, energy changes only at the RK2 truncation level."""
    m = CoefficientModel.constant(1e-12, 1.0)
    c = rng.standard_normal(basis.m) * 0.1
    e0 = modal_energy(c)
    for _ in range(10):
        c = galerkin_ns_step(c, basis, 1e-4, m=m)
    assert abs(modal_energy(c) - e0) < 1e-6 * e0


def test_constant_forcing_energy_input(basis):
    """For small dt, dE/dt = <f, u> - dissipation; start at rest so the first step is pure forcing."""
    f = basis.mode(1) * 2.0
    c = galerkin_ns_step(np.zeros(basis.m), basis, 1e-4, ModalForcing(extra=f),
                         phys=PhysicalParams(Ra=0.0), m=CoefficientModel.constant(1.0, 1.0))
    assert c[1] == pytest.approx(2.0e-4, rel=1e-2)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_overflow_raises(basis):
    c = np.zeros(basis.m)
    c[-1] = 1e200
    with pytest.raises(NonConvergenceError):
        galerkin_ns_step(c, basis, 1.0)


def test_rejects_nonpositive_dt(basis):
    with pytest.raises(ValueError):
        galerkin_ns_step(np.zeros(basis.m), basis, 0.0)
