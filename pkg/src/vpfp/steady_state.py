"""Global equilibrium f_inf = rho_inf(x) M(v) via the nonlinear field equation.

rho_inf is the normalized Boltzmann density of V + phi_inf where phi_inf
solves the Poisson--Boltzmann--Emden fixed point

    -phi_inf'' = rho_inf[phi_inf],
    rho_inf[phi] = exp(-beta (V + phi)) / Z(phi),   beta = nu/sigma,

iterated with damped Picard: phi <- (1-theta) phi + theta G*rho[phi]. The
`coupling` knob scales the Poisson source; coupling = 0 reproduces the pure
external-potential equilibrium exp(-beta V)/Z with phi_inf = 0 (a test hook
and the CLI --coupling-off mode).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Array, PhaseGrid, integrate_x, xfield_to_csv
from .poisson import solve_poisson
from .potential import PhysParams, Potential

__all__ = ["SteadyState", "maxwellian", "boltzmann_density", "solve_pbe", "assemble_equilibrium"]


def maxwellian(grid: PhaseGrid, params: PhysParams) -> Array:
    """Maxwellian M(v) = exp(-beta v^2 / 2), normalized on the truncated grid.

    Discrete normalization (midpoint sum = 1) rather than the continuum
    constant sqrt(2 pi / beta): the truncation at |v| = Lv cuts the Gaussian
    tail (~2e-9 at Lv = 6, beta = 1), and the discrete equilibrium should
    carry unit discrete mass exactly.  The relative difference from the
    continuum normalization is that same tail mass.
    """
    dens = np.exp(-0.5 * params.beta * grid.v**2)
    return dens / (dens.sum() * grid.dv)


def boltzmann_density(grid: PhaseGrid, w_values: Array, params: PhysParams) -> Array:
    """exp(-beta w) normalized to unit mass; shift-invariant against overflow."""
    a = -params.beta * (w_values - np.min(w_values))
    dens = np.exp(a)
    z = integrate_x(grid, dens)
    if not np.isfinite(z) or z <= 0:
        raise FloatingPointError("Boltzmann normalization failed (unconfined potential?)")
    return dens / z


@dataclass(frozen=True)
class SteadyState:
    """Converged equilibrium plus cached derived quantities.

    residual is the fixed-point residual sup |phi - G*rho[phi]| (certified
    below the solver tolerance); residual_laplacian is the 3-point-stencil
    check sup |-D2 phi - rho| which is O(dx^2) by construction. W1/W2 are the
    first/second derivatives of the effective potential W = V + phi_inf, the
    second computed exactly from the field equation phi'' = -coupling rho.
    """

    grid: PhaseGrid
    params: PhysParams
    potential: Potential
    coupling: float
    phi_inf: Array
    grad_phi_inf: Array
    rho_inf: Array
    M: Array
    f_inf: Array
    sqrt_f_inf: Array
    rho_sup: float
    iterations: int
    residual: float
    residual_laplacian: float
    converged: bool
    init_gap: float | None = None

    @property
    def W1(self) -> Array:
        return self.potential.dV(self.grid.x) + self.grad_phi_inf

    @property
    def W2(self) -> Array:
        return self.potential.d2V(self.grid.x) - self.coupling * self.rho_inf

    def mass(self) -> float:
        """Discrete integral of f_inf (should be 1 up to truncation error)."""
        return float(self.f_inf.sum() * self.grid.cell_weight)

    def boundary_mass(self) -> float:
        """Equilibrium mass in the outer half of the box, |x| or |v| > L/2."""
        g = self.grid
        outer = (np.abs(g.x)[:, None] > g.Lx / 2) | (np.abs(g.v)[None, :] > g.Lv / 2)
        return float(self.f_inf[outer].sum() * g.cell_weight)

    def summary(self) -> dict:
        out = {
            "residual": self.residual,
            "residual_laplacian": self.residual_laplacian,
            "iterations": self.iterations,
            "rho_sup": self.rho_sup,
            "converged": self.converged,
            "mass": self.mass(),
            "boundary_mass": self.boundary_mass(),
            "coupling": self.coupling,
        }
        if self.init_gap is not None:
            out["init_gap"] = self.init_gap
        return out

    def to_csv(self, path) -> None:
        xfield_to_csv(self.grid, {"rho_inf": self.rho_inf, "phi_inf": self.phi_inf}, path)


def assemble_equilibrium(
    grid: PhaseGrid,
    potential: Potential,
    params: PhysParams,
    phi_inf: Array,
    *,
    coupling: float = 1.0,
    iterations: int = 0,
    residual: float = 0.0,
    init_gap: float | None = None,
    converged: bool = True,
) -> SteadyState:
    """Assemble the product equilibrium from a (given or computed) phi_inf."""
    potential.check_bounded_below(grid.x)
    w = potential.V(grid.x) + phi_inf
    rho = boltzmann_density(grid, w, params)
    M = maxwellian(grid, params)
    f_inf = rho[:, None] * M[None, :]
    field = solve_poisson(grid, coupling * rho)
    d2 = (phi_inf[:-2] - 2.0 * phi_inf[1:-1] + phi_inf[2:]) / grid.dx**2
    res_lap = float(np.max(np.abs(-d2 - coupling * rho[1:-1]))) if grid.nx > 2 else 0.0
    return SteadyState(
        grid=grid,
        params=params,
        potential=potential,
        coupling=coupling,
        phi_inf=np.asarray(phi_inf, dtype=np.float64),
        grad_phi_inf=field.grad if coupling != 0.0 else np.zeros(grid.nx),
        rho_inf=rho,
        M=M,
        f_inf=f_inf,
        sqrt_f_inf=np.sqrt(f_inf),
        rho_sup=float(np.max(rho)),
        iterations=iterations,
        residual=residual,
        residual_laplacian=res_lap,
        converged=converged,
        init_gap=init_gap,
    )


def _picard(grid, potential, params, coupling, theta, tol, max_iter, phi0):
    """Damped Picard iteration; returns (phi, iterations, fp_residual, converged)."""
    vx = potential.V(grid.x)
    phi = phi0.copy()
    its = 0
    for its in range(1, max_iter + 1):
        rho = boltzmann_density(grid, vx + phi, params)
        target = solve_poisson(grid, coupling * rho).psi
        nxt = (1.0 - theta) * phi + theta * target
        inc = float(np.max(np.abs(nxt - phi)))
        phi = nxt
        if inc < tol:
            break
    rho = boltzmann_density(grid, vx + phi, params)
    fp_res = float(np.max(np.abs(phi - solve_poisson(grid, coupling * rho).psi)))
    return phi, its, fp_res, inc < tol


def solve_pbe(
    grid: PhaseGrid,
    potential: Potential,
    params: PhysParams,
    *,
    theta_relax: float = 0.5,
    tol: float = 1e-10,
    max_iter: int = 500,
    coupling: float = 1.0,
    check_second_init: bool = False,
) -> SteadyState:
    """Solve the steady field equation and assemble the equilibrium.

    Stops when the sup-norm potential increment drops below tol; raises on
    non-convergence. With check_second_init, re-solves from
    phi0 = G*(exp(-beta V)/Z) and records the sup-norm gap between the two
    fixed points (a 1-D uniqueness diagnostic).
    """
    if not 0.0 < theta_relax <= 1.0:
        raise ValueError(f"theta_relax must lie in (0, 1], got {theta_relax}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    potential.check_bounded_below(grid.x)

    if coupling == 0.0:
        phi = np.zeros(grid.nx)
        return assemble_equilibrium(
            grid, potential, params, phi, coupling=0.0, iterations=0, residual=0.0
        )

    phi, its, fp_res, ok = _picard(
        grid, potential, params, coupling, theta_relax, tol, max_iter, np.zeros(grid.nx)
    )
    if not ok:
        raise RuntimeError(
            f"PBE Picard did not converge in {max_iter} iterations (last residual {fp_res:.3e})"
        )

    init_gap = None
    if check_second_init:
        rho_v = boltzmann_density(grid, potential.V(grid.x), params)
        phi_b, _, _, ok_b = _picard(
            grid, potential, params, coupling, theta_relax, tol, max_iter,
            solve_poisson(grid, coupling * rho_v).psi,
        )
        init_gap = float(np.max(np.abs(phi - phi_b))) if ok_b else np.inf

    return assemble_equilibrium(
        grid, potential, params, phi,
        coupling=coupling, iterations=its, residual=fp_res, init_gap=init_gap,
    )
