"""Analytic confining-potential families and confinement diagnostics.

Supported families (all with closed-form first and second derivatives so no
numerical differencing leaks into the constants estimators):

    quadratic      V(x) = omega * x^2 / 2
    power          V(x) = r * |x|^k,            k > 1
    double_well    V(x) = r1 * x^4 - r2 * x^2
    perturbed      V(x) = r * |x|^k + V0(x),    V0 polynomial of degree < k
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .grid import Array, PhaseGrid, integrate_x

__all__ = [
    "PhysParams",
    "Potential",
    "make_potential",
    "verify_A2",
    "ConfinementReport",
    "verify_confinement",
]


@dataclass(frozen=True)
class PhysParams:
    """Friction nu and diffusion sigma (both > 0)."""

    nu: float = 1.0
    sigma: float = 1.0

    def __post_init__(self) -> None:
        if self.nu <= 0 or self.sigma <= 0:
            raise ValueError(f"nu and sigma must be positive, got nu={self.nu}, sigma={self.sigma}")

    @property
    def beta(self) -> float:
        """Inverse temperature nu/sigma multiplying V + phi in the Boltzmann weight."""
        return self.nu / self.sigma


@dataclass(frozen=True)
class Potential:
    """Confining potential with exact derivative callables."""

    family: str
    coefficients: dict
    V: Callable[[Array], Array] = field(repr=False)
    dV: Callable[[Array], Array] = field(repr=False)
    d2V: Callable[[Array], Array] = field(repr=False)

    def check_bounded_below(self, x: Array) -> None:
        vals = self.V(x)
        if not np.all(np.isfinite(vals)):
            raise ValueError(f"potential {self.family} not finite on the grid")


def make_potential(family: str, **coefficients: float) -> Potential:
    """Build a potential from a family name and its coefficients."""
    if family == "quadratic":
        omega = float(coefficients.get("omega", 1.0))
        if omega <= 0:
            raise ValueError(f"quadratic potential needs omega > 0, got {omega}")
        return Potential(
            family,
            {"omega": omega},
            V=lambda x: 0.5 * omega * x**2,
            dV=lambda x: omega * x,
            d2V=lambda x: omega * np.ones_like(x),
        )

    if family == "power":
        r = float(coefficients.get("r", 1.0))
        k = float(coefficients.get("k", 4.0))
        _check_power(r, k)
        return Potential(
            family,
            {"r": r, "k": k},
            V=lambda x: r * np.abs(x) ** k,
            dV=lambda x: r * k * np.sign(x) * np.abs(x) ** (k - 1.0),
            d2V=lambda x: r * k * (k - 1.0) * np.abs(x) ** (k - 2.0),
        )

    if family == "double_well":
        r1 = float(coefficients.get("r1", 0.25))
        r2 = float(coefficients.get("r2", 1.0))
        if r1 <= 0:
            raise ValueError(f"double well needs r1 > 0, got {r1}")
        return Potential(
            family,
            {"r1": r1, "r2": r2},
            V=lambda x: r1 * x**4 - r2 * x**2,
            dV=lambda x: 4.0 * r1 * x**3 - 2.0 * r2 * x,
            d2V=lambda x: 12.0 * r1 * x**2 - 2.0 * r2 * np.ones_like(x),
        )

    if family == "perturbed":
        r = float(coefficients.get("r", 1.0))
        k = float(coefficients.get("k", 4.0))
        _check_power(r, k)
        coeffs = [float(c) for c in coefficients.get("poly", [0.0])]
        if len(coeffs) - 1 >= k:
            raise ValueError(
                f"perturbation degree {len(coeffs) - 1} must be < k = {k} to preserve confinement"
            )
        p = np.polynomial.Polynomial(coeffs)
        dp = p.deriv()
        d2p = dp.deriv()
        return Potential(
            family,
            {"r": r, "k": k, "poly": coeffs},
            V=lambda x: r * np.abs(x) ** k + p(x),
            dV=lambda x: r * k * np.sign(x) * np.abs(x) ** (k - 1.0) + dp(x),
            d2V=lambda x: r * k * (k - 1.0) * np.abs(x) ** (k - 2.0) + d2p(x),
        )

    raise ValueError(f"unknown potential family {family!r}")


def _check_power(r: float, k: float) -> None:
    if r <= 0:
        raise ValueError(f"power potential needs r > 0, got r={r}")
    if k <= 1:
        raise ValueError(f"power potential needs k > 1, got k={k}")


def verify_A2(pot: Potential, grid: PhaseGrid) -> float:
    """max over x-nodes of |V''| / (1 + |V'|), the confinement-growth ratio c1."""
    x = grid.x
    return float(np.max(np.abs(pot.d2V(x)) / (1.0 + np.abs(pot.dV(x)))))


@dataclass(frozen=True)
class ConfinementReport:
    c1: float
    tail_ratio: float
    tail_ok: bool
    bounded_below: bool

    def as_dict(self) -> dict:
        return {
            "c1": self.c1,
            "tail_ratio": self.tail_ratio,
            "tail_ok": self.tail_ok,
            "bounded_below": self.bounded_below,
        }


def verify_confinement(pot: Potential, grid: PhaseGrid, params: PhysParams,
                       tail_tol: float = 1e-6) -> ConfinementReport:
    """Numerical confinement checks.

    Integrability of exp(-nu V / sigma) is checked by comparing the Boltzmann
    mass in the outer half |x| > Lx/2 against the total on [-Lx, Lx]; a ratio
    below tail_tol means the truncated domain captures the measure.
    """
    x = grid.x
    w = np.exp(-params.beta * (pot.V(x) - np.min(pot.V(x))))
    total = integrate_x(grid, w)
    outer = integrate_x(grid, np.where(np.abs(x) > grid.Lx / 2.0, w, 0.0))
    ratio = outer / total
    return ConfinementReport(
        c1=verify_A2(pot, grid),
        tail_ratio=float(ratio),
        tail_ok=bool(ratio < tail_tol),
        bounded_below=bool(np.all(np.isfinite(pot.V(x)))),
    )
