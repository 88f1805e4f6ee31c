import numpy as np
import pytest

from helpers import streamfunction_velocity
from nschb import operators as ops
from nschb.cahn_hilliard import CHStepConfig, ch_energy, ch_step, chemical_potential, separation_delta
from nschb.errors import DomainError
from nschb.fields import Grid, ScalarField
from nschb.potential import WP, PotentialParams, eval_potential

P = PotentialParams(1.0, 2.0)


def _noise(grid, amp, seed):
    return ScalarField(grid, np.random.default_rng(seed).uniform(-amp, amp, grid.shape))


def _mass(phi):
    return float(np.sum(ops.cell_weights(phi.grid) * phi.values))


@pytest.mark.parametrize("c", [0.0, 0.3, -0.95])
def test_constant_state_is_an_equilibrium(c):
    g = Grid(8, 8)
    phi = ScalarField(g, np.full(g.shape, c))
    phi1, mu1 = ch_step(phi, None, P, CHStepConfig(0.1))
    assert np.allclose(phi1.values, c, atol=1e-13)
    assert np.allclose(mu1.values, eval_potential(P, c, WP), atol=1e-10)


def test_spinodal_run_conserves_mass_and_decreases_energy():
    g = Grid(16, 16, 4.0, 4.0)
    phi = _noise(g, 0.05, 0)
    m0, e_prev = _mass(phi), ch_energy(phi, P)
    cfg = CHStepConfig(1e-3)
    mu = None
    for _ in range(1000):
        phi, mu = ch_step(phi, None, P, cfg, mu_guess=mu)
        e = ch_energy(phi, P)
        assert e <= e_prev + 1e-12 * max(1.0, abs(e_prev))
        e_prev = e
    assert abs(_mass(phi) - m0) <= 1e-12
    assert phi.max_abs() < 1.0


def test_energy_decreases_for_large_steps():
    g = Grid(16, 16, 4.0, 4.0)
    phi = _noise(g, 0.5, 1)
    e_prev = ch_energy(phi, P)
    for _ in range(20):
        phi, _ = ch_step(phi, None, P, CHStepConfig(0.5))
        e = ch_energy(phi, P)
        assert e <= e_prev + 1e-12
        e_prev = e


def test_mass_conserved_with_convection():
    g = Grid(24, 24)
    u = streamfunction_velocity(g, np.array([[2.0, 0.5], [0.0, 1.0]]))
    phi = _noise(g, 0.4, 2)
    m0 = _mass(phi)
    mu = None
    for _ in range(50):
        phi, mu = ch_step(phi, u, P, CHStepConfig(1e-3), mu_guess=mu)
    assert abs(_mass(phi) - m0) <= 1e-12


def test_returned_mu_is_the_discrete_chemical_potential():
    g = Grid(16, 16)
    phi = _noise(g, 0.5, 3)
    phi1, mu1 = ch_step(phi, None, P, CHStepConfig(1e-3))
    # convex splitting: mu+ = -Lap phi+ + F'(phi+) - B phi_n
    mu_split = chemical_potential(phi1, P).values + P.B * (phi1.values - phi.values)
    assert np.allclose(mu1.values, mu_split, atol=1e-8)


def test_chemical_potential_of_constant():
    g = Grid(6, 6)
    mu = chemical_potential(ScalarField(g, np.full(g.shape, 0.5)), P)
    assert np.allclose(mu.values, eval_potential(P, 0.5, WP))


@pytest.mark.parametrize("phi,delta", [(0.0, 1.0), (0.5, 0.5), (-0.9, 0.1)])
def test_separation_delta(phi, delta):
    g = Grid(4, 4)
    v = np.zeros(g.shape)
    v[1, 2] = phi
    assert separation_delta(ScalarField(g, v)) == pytest.approx(delta, abs=1e-15)


def test_separation_delta_rejects_pure_phase():
    g = Grid(4, 4)
    with pytest.raises(DomainError):
        separation_delta(ScalarField(g, np.ones(g.shape)))


def test_step_rejects_out_of_range_input():
    g = Grid(4, 4)
    v = np.zeros(g.shape)
    v[0, 0] = 1.0
    with pytest.raises(DomainError):
        ch_step(ScalarField(g, v), None, P, CHStepConfig(1e-3))


def test_config_rejects_nonpositive_dt():
    with pytest.raises(ValueError):
        CHStepConfig(0.0)


@pytest.mark.parametrize("n", [16, 32])
def test_near_pure_interface_relaxes(n):
    """A sharp layer within 1e-3 of the pure phases: strictly bounded, mass kept."""
    g = Grid(n, n)
    X, _ = g.cell_coords()
    phi = ScalarField(g, 0.999 * np.tanh(20 * (X - 0.5)))
    m0 = _mass(phi)
    mu = None
    for _ in range(10):
        phi, mu = ch_step(phi, None, P, CHStepConfig(1e-3), mu_guess=mu)
        assert phi.max_abs() < 1.0
    assert abs(_mass(phi) - m0) <= 1e-12
    assert separation_delta(phi) > 0.1


def test_step_from_phi_within_round_off_of_one():
    g = Grid(8, 8)
    v = np.zeros(g.shape)
    v[:4] = np.nextafter(1.0, 0.0)
    v[4:] = -np.nextafter(1.0, 0.0)
    phi, _ = ch_step(ScalarField(g, v), None, P, CHStepConfig(1e-3))
    assert phi.max_abs() < 1.0 and abs(_mass(phi)) <= 1e-12
