import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nschb import potential as pot
from nschb.errors import DomainError, RangeError
from nschb.potential import CoefficientModel, PhysicalParams, PotentialParams, TanhCoefficient
from oracles import WP_HALF

P = PotentialParams(1.0, 2.0)
open_interval = st.floats(-0.999999, 0.999999)


@pytest.mark.parametrize("which", [pot.W, pot.WP, pot.F, pot.FP])
def test_vanishes_at_zero(which):
    assert pot.eval_potential(P, 0.0, which) == 0.0


def test_wp_half_oracle():
    assert pot.eval_potential(P, 0.5, pot.WP) == pytest.approx(WP_HALF, rel=1e-14)


def test_wpp_minimum_is_minus_alpha():
    x = np.linspace(-0.99, 0.99, 1001)
    w = pot.eval_potential(P, x, pot.WPP)
    assert w.min() == pytest.approx(-P.alpha, abs=1e-12)
    assert pot.eval_potential(P, P.phi_star, pot.WPP) == pytest.approx(0.0, abs=1e-12)


@given(open_interval)
def test_symmetry_and_convexity(x):
    assert pot.eval_potential(P, -x, pot.W) == pytest.approx(pot.eval_potential(P, x, pot.W), abs=1e-14)
    assert pot.eval_potential(P, -x, pot.WP) == pytest.approx(-pot.eval_potential(P, x, pot.WP), abs=1e-12)
    assert pot.eval_potential(P, x, pot.FPP) >= P.A
    assert pot.eval_potential(P, x, pot.WPP) >= -P.alpha - 1e-12


@given(open_interval)
def test_derivatives_match_finite_differences(x):
    if abs(x) > 0.99:
        return
    h = 1e-6
    fd = (pot.eval_potential(P, x + h, pot.W) - pot.eval_potential(P, x - h, pot.W)) / (2 * h)
    assert fd == pytest.approx(pot.eval_potential(P, x, pot.WP), abs=1e-6)


@pytest.mark.parametrize("bad", [1.0, -1.0, 1.5, np.nan])
@pytest.mark.parametrize("which", [pot.W, pot.WP, pot.WPP, pot.F, pot.FP, pot.FPP])
def test_domain_error_outside_open_interval(bad, which):
    with pytest.raises(DomainError):
        pot.eval_potential(P, np.array([0.0, bad]), which)


def test_unknown_component():
    with pytest.raises(ValueError):
        pot.eval_potential(P, 0.1, "G")


@given(st.floats(-30.0, 30.0))
def test_fp_inverse_round_trip(y):
    phi = pot.fp_inverse(P, y)
    assert abs(phi) < 1.0
    # one rounding of phi moves F'(phi) by about eps * A / (1 - phi^2)
    cond = P.A / ((1 - phi) * (1 + phi))
    assert abs(pot.eval_potential(P, phi, pot.FP) - y) <= 4 * np.finfo(float).eps * (cond + abs(y)) or abs(y) > 18


@pytest.mark.parametrize("A,B", [(2.0, 2.0), (3.0, 2.0), (0.0, 1.0), (-1.0, 1.0)])
def test_params_need_a_below_b(A, B):
    with pytest.raises(ValueError):
        PotentialParams(A, B)


def test_lambda_example():
    m = CoefficientModel(lambda0=1.0, a=1.0, b=0.25)
    assert pot.eval_coefficients(m, 0.8)[2] == pytest.approx(0.8, abs=1e-15)


def test_lambda_is_affine(rng):
    m = CoefficientModel(lambda0=2.0, a=1.5, b=0.3)
    t = rng.uniform(-3, 3, 20)
    lam = m.lam(t)
    assert np.allclose(np.diff(lam) / np.diff(t), -2.0 * 0.3)


def test_coefficient_bounds_hold_on_samples(rng):
    m = CoefficientModel()
    nu, kappa, _ = pot.eval_coefficients(m, rng.uniform(-50, 50, 10_000))
    assert m.nu_lo <= nu.min() and nu.max() <= m.nu_hi
    assert m.kappa_lo <= kappa.min() and kappa.max() <= m.kappa_hi


def test_tanh_coefficient_calculus():
    c = TanhCoefficient(1.0, 0.1)
    t = np.linspace(-2, 2, 9)
    h = 1e-6
    assert np.allclose((c.antiderivative(t + h) - c.antiderivative(t - h)) / (2 * h), c(t), atol=1e-8)
    assert np.allclose((c(t + h) - c(t - h)) / (2 * h), c.derivative(t), atol=1e-8)
    assert c.antiderivative(0.0) == 0.0
    assert np.isfinite(c.antiderivative(1e4))
    with pytest.raises(ValueError):
        TanhCoefficient(0.1, 0.1)


def test_declared_bounds_must_cover_model():
    with pytest.raises(ValueError):
        CoefficientModel(nu_lo=0.95)
    with pytest.raises(ValueError):
        CoefficientModel(nu_lo=-1.0)


def test_theta_range_check():
    m = CoefficientModel().with_theta_range(0.5)
    pot.eval_coefficients(m, np.array([-0.5, 0.5]))
    with pytest.raises(RangeError):
        pot.eval_coefficients(m, 0.6)


def test_constant_model():
    m = CoefficientModel.constant(0.3, 0.7)
    nu, kappa, _ = pot.eval_coefficients(m, 5.0)
    assert (nu, kappa) == (0.3, 0.7)


def test_physical_params_defaults():
    p = PhysicalParams()
    assert p.Ga == 0.0


def test_fp_inverse_stays_inside_for_huge_arguments():
    phi = pot.fp_inverse(P, np.array([-1e3, -40.0, 40.0, 1e3]))
    assert np.all(np.abs(phi) < 1.0)
    pot.eval_potential(P, phi, pot.FP)
