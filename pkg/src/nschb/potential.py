"""Logarithmic double-well potential and temperature-dependent coefficients.

The potential is

    W(phi) = A/2 [(1+phi) ln(1+phi) + (1-phi) ln(1-phi)] - B/2 phi^2,

with convex part ``F`` (the entropic term) and concave part ``-B phi^2 / 2``.
All evaluators accept scalars or arrays and raise :class:`DomainError` when
any entry leaves the open interval (-1, 1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, RangeError

W = "W"
WP = "Wp"
WPP = "Wpp"
F = "F"
FP = "Fp"
FPP = "Fpp"


@dataclass(frozen=True)
class PotentialParams:
    """Constants of the logarithmic potential, ``0 < A < B``."""

    A: float = 1.0
    B: float = 2.0

    def __post_init__(self):
        if not (0.0 < self.A < self.B):
            raise ValueError(f"need 0 < A < B, got A={self.A}, B={self.B}")

    @property
    def alpha(self) -> float:
        """Lower bound constant: ``W'' >= -alpha`` with ``alpha = B - A``."""
        return self.B - self.A

    @property
    def phi_star(self) -> float:
        """Spinodal point where ``W''`` changes sign."""
        return float(np.sqrt(1.0 - self.A / self.B))


def _check_domain(phi):
    phi = np.asarray(phi, dtype=float)
    if not np.all(np.abs(phi) < 1.0):
        bad = float(np.max(np.abs(phi))) if phi.size else float("nan")
        raise DomainError(f"order parameter outside (-1, 1): max |phi| = {bad!r}")
    return phi


def _entropy(phi):
    # (1+p)ln(1+p) + (1-p)ln(1-p), written with log1p for accuracy near 0 and +-1
    return (1.0 + phi) * np.log1p(phi) + (1.0 - phi) * np.log1p(-phi)


def _fp(A, phi):
    # A/2 ln((1+p)/(1-p)) = A artanh(p)
    return A * np.arctanh(phi)


def eval_potential(p: PotentialParams, phi, which: str = W):
    """Evaluate ``W``, ``Wp``, ``Wpp``, ``F``, ``Fp`` or ``Fpp`` at ``phi``.

    Returns a float for scalar input and an array otherwise.
    """
    scalar = np.ndim(phi) == 0
    x = _check_domain(phi)
    if which == W:
        out = 0.5 * p.A * _entropy(x) - 0.5 * p.B * x**2
    elif which == WP:
        out = _fp(p.A, x) - p.B * x
    elif which == WPP:
        out = p.A / (1.0 - x**2) - p.B
    elif which == F:
        out = 0.5 * p.A * _entropy(x)
    elif which == FP:
        out = _fp(p.A, x)
    elif which == FPP:
        out = p.A / (1.0 - x**2)
    else:
        raise ValueError(f"unknown potential component {which!r}")
    return float(out) if scalar else out


def fp_inverse(p: PotentialParams, y):
    """Inverse of ``F'``: the unique ``phi`` in (-1, 1) with ``F'(phi) = y``.

    ``tanh`` rounds to exactly 1 for ``y / A`` beyond about 19; the result is
    clamped to the nearest double inside the open interval.
    """
    lim = np.nextafter(1.0, 0.0)
    return np.clip(np.tanh(np.asarray(y, dtype=float) / p.A), -lim, lim)


# --- coefficients -----------------------------------------------------------


@dataclass(frozen=True)
class TanhCoefficient:
    """``c(theta) = base + amp * tanh(theta)``; ``amp = 0`` gives a constant."""

    base: float = 1.0
    amp: float = 0.0

    def __post_init__(self):
        if self.base - abs(self.amp) <= 0.0:
            raise ValueError("coefficient must stay positive: need base > |amp|")

    def __call__(self, theta):
        return self.base + self.amp * np.tanh(theta)

    def derivative(self, theta):
        return self.amp / np.cosh(theta) ** 2

    def antiderivative(self, theta):
        """``int_0^theta c(s) ds`` in closed form."""
        theta = np.asarray(theta, dtype=float)
        # log(cosh t) = |t| + log1p(exp(-2|t|)) - log 2 avoids overflow
        a = np.abs(theta)
        return self.base * theta + self.amp * (a + np.log1p(np.exp(-2.0 * a)) - np.log(2.0))

    @property
    def lower(self) -> float:
        return self.base - abs(self.amp)

    @property
    def upper(self) -> float:
        return self.base + abs(self.amp)


@dataclass(frozen=True)
class CoefficientModel:
    """Viscosity, conductivity and the linear surface-tension law.

    ``nu_lo .. kappa_hi`` are the declared bounds; they default to the
    global bounds of the tanh family.  ``theta_range`` is the attainable
    temperature interval, usually ``[-max|theta0|, max|theta0|]``; ``None``
    disables the range check.
    """

    nu: TanhCoefficient = TanhCoefficient(1.0, 0.1)
    kappa: TanhCoefficient = TanhCoefficient(1.0, 0.1)
    lambda0: float = 1.0
    a: float = 1.0
    b: float = 0.25
    nu_lo: float | None = None
    nu_hi: float | None = None
    kappa_lo: float | None = None
    kappa_hi: float | None = None
    theta_range: tuple[float, float] | None = None

    def __post_init__(self):
        for name, coef, lo in (("nu", self.nu, "nu_lo"), ("kappa", self.kappa, "kappa_lo")):
            if getattr(self, lo) is None:
                object.__setattr__(self, lo, coef.lower)
            hi = name + "_hi"
            if getattr(self, hi) is None:
                object.__setattr__(self, hi, coef.upper)
        if not (0 < self.nu_lo <= self.nu_hi and 0 < self.kappa_lo <= self.kappa_hi):
            raise ValueError("coefficient bounds must be positive and ordered")
        if self.nu.lower < self.nu_lo - 1e-15 or self.nu.upper > self.nu_hi + 1e-15:
            raise ValueError("viscosity model exceeds its declared bounds")
        if self.kappa.lower < self.kappa_lo - 1e-15 or self.kappa.upper > self.kappa_hi + 1e-15:
            raise ValueError("conductivity model exceeds its declared bounds")

    @classmethod
    def constant(cls, nu0: float = 1.0, kappa0: float = 1.0, **kw) -> "CoefficientModel":
        return cls(nu=TanhCoefficient(nu0, 0.0), kappa=TanhCoefficient(kappa0, 0.0), **kw)

    def with_theta_range(self, bound: float) -> "CoefficientModel":
        from dataclasses import replace

        return replace(self, theta_range=(-abs(bound), abs(bound)))

    def check_range(self, theta, tol: float = 1e-12):
        if self.theta_range is None:
            return
        lo, hi = self.theta_range
        t = np.asarray(theta, dtype=float)
        if t.size and (np.min(t) < lo - tol or np.max(t) > hi + tol):
            raise RangeError(
                f"temperature outside attainable range [{lo}, {hi}]: "
                f"min {float(np.min(t))!r}, max {float(np.max(t))!r}"
            )

    def lam(self, theta):
        return self.lambda0 * (self.a - self.b * np.asarray(theta, dtype=float))


def eval_coefficients(m: CoefficientModel, theta):
    """Return ``(nu, kappa, lambda)`` at ``theta`` (scalar or array)."""
    m.check_range(theta)
    scalar = np.ndim(theta) == 0
    t = np.asarray(theta, dtype=float)
    out = (m.nu(t), m.kappa(t), m.lam(t))
    return tuple(float(v) for v in out) if scalar else out


@dataclass(frozen=True)
class PhysicalParams:
    """Buoyancy constants: the force is ``(Ra theta - Ga) g e2``."""

    Ra: float = 1.0
    Ga: float = 0.0
    g: float = 1.0

    def __post_init__(self):
        if not all(np.isfinite([self.Ra, self.Ga, self.g])):
            raise ValueError("physical parameters must be finite")
