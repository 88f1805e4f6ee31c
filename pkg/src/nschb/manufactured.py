"""Manufactured solutions and their source terms, derived symbolically.

Each builder returns a :class:`Manufactured` bundle of vectorised callables
``f(t, x, y)`` for the exact solution and the source that makes it solve the
forced equation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import sympy as sp

from .potential import CoefficientModel, PotentialParams

x, y, t = sp.symbols("x y t", real=True)


@dataclass(frozen=True)
class Manufactured:
    exact: Callable
    source: Callable
    mu: Callable | None = None

    def exact_field(self, tt: float, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        return np.broadcast_to(self.exact(tt, X, Y), X.shape).astype(float)

    def source_field(self, tt: float, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        return np.broadcast_to(self.source(tt, X, Y), X.shape).astype(float)


def _lap(e):
    return sp.diff(e, x, 2) + sp.diff(e, y, 2)


def _fn(expr):
    return sp.lambdify((t, x, y), expr, modules="numpy")


def heat_solution(m: CoefficientModel, lx: float = 1.0, ly: float = 1.0, amplitude: float = 1.0) -> Manufactured:
    """``theta* = a exp(-t) sin(pi x / lx) sin(pi y / ly)`` for ``theta_t = div(kappa(theta) grad theta) + S``."""
    th = amplitude * sp.exp(-t) * sp.sin(sp.pi * x / lx) * sp.sin(sp.pi * y / ly)
    kappa = m.kappa.base + m.kappa.amp * sp.tanh(th)
    flux_div = sp.diff(kappa * sp.diff(th, x), x) + sp.diff(kappa * sp.diff(th, y), y)
    src = sp.diff(th, t) - flux_div
    return Manufactured(_fn(th), _fn(src))


def ch_solution(p: PotentialParams, lx: float = 1.0, ly: float = 1.0, amplitude: float = 0.5) -> Manufactured:
    """``phi* = a cos(pi x / lx) cos(pi y / ly) exp(-t)`` for ``phi_t = Lap mu + S``, ``mu = -Lap phi + W'(phi)``."""
    ph = amplitude * sp.cos(sp.pi * x / lx) * sp.cos(sp.pi * y / ly) * sp.exp(-t)
    mu = -_lap(ph) + p.A * sp.atanh(ph) - p.B * ph
    src = sp.diff(ph, t) - _lap(mu)
    return Manufactured(_fn(ph), _fn(src), _fn(mu))
