import numpy as np
import pytest

from vpfp import PhysParams, build_grid, make_potential, solve_pbe


@pytest.fixture(scope="session")
def params():
    return PhysParams(nu=1.0, sigma=1.0)


@pytest.fixture(scope="session")
def grid64():
    return build_grid(64, 64, 6.0, 6.0)


@pytest.fixture(scope="session")
def eq64(grid64, params):
    """Self-consistent quadratic-confinement equilibrium on a fast grid."""
    pot = make_potential("quadratic", omega=1.0)
    return solve_pbe(grid64, pot, params, coupling=1.0)


@pytest.fixture(scope="session")
def eq64_uncoupled(grid64, params):
    pot = make_potential("quadratic", omega=1.0)
    return solve_pbe(grid64, pot, params, coupling=0.0)


@pytest.fixture(scope="session")
def eq128(params):
    """The physical-test resolution: 128x128 on [-6,6]^2."""
    grid = build_grid(128, 128, 6.0, 6.0)
    pot = make_potential("quadratic", omega=1.0)
    return solve_pbe(grid, pot, params, coupling=1.0)


def smooth_datum(eq, amplitude=1.0):
    """Mean-zero smooth test perturbation of prescribed L2(f_inf) size."""
    from vpfp import project_mean_zero, weighted_norm_sq

    X, V = eq.grid.meshes()
    Lx = eq.grid.Lx
    hv = (np.cos(np.pi * X / (2.0 * Lx)) * np.exp(-0.5 * (V - 0.7) ** 2)
          + 0.4 * np.sin(np.pi * X / Lx) * V * np.exp(-0.25 * V**2))
    hv = project_mean_zero(hv, eq)
    n = np.sqrt(weighted_norm_sq(eq.grid, hv, eq.f_inf))
    return amplitude * hv / n
