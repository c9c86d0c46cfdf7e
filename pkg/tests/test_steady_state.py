import numpy as np
import pytest

from vpfp.grid import build_grid, integrate_x
from vpfp.poisson import solve_poisson
from vpfp.potential import PhysParams, make_potential
from vpfp.steady_state import (boltzmann_density, maxwellian, solve_pbe)


def test_maxwellian_discrete_mass_is_exact(grid64, params):
    M = maxwellian(grid64, params)
    assert M.sum() * grid64.dv == pytest.approx(1.0, abs=1e-15)
    # shape matches the continuum Gaussian up to the (tiny) normalization shift
    cont = np.exp(-0.5 * grid64.v**2) / np.sqrt(2 * np.pi)
    np.testing.assert_allclose(M, cont, rtol=1e-8)


def test_boltzmann_density_normalization_and_shift_invariance(grid64, params):
    w = 0.5 * grid64.x**2
    rho = boltzmann_density(grid64, w, params)
    assert integrate_x(grid64, rho) == pytest.approx(1.0, abs=1e-14)
    np.testing.assert_allclose(rho, boltzmann_density(grid64, w + 37.0, params),
                               rtol=1e-13)


def test_coupling_off_reproduces_external_equilibrium(eq64_uncoupled, grid64, params):
    eq = eq64_uncoupled
    assert np.all(eq.phi_inf == 0.0)
    assert np.all(eq.grad_phi_inf == 0.0)
    expected = boltzmann_density(grid64, make_potential("quadratic").V(grid64.x), params)
    np.testing.assert_allclose(eq.rho_inf, expected, rtol=1e-13)
    assert eq.iterations == 0


def test_quadratic_equilibrium_certifies_residual(eq64):
    assert eq64.converged
    assert eq64.residual <= 1e-10
    assert eq64.mass() == pytest.approx(1.0, abs=1e-13)
    # the field equation is satisfied at the stencil level, O(dx^2)
    assert eq64.residual_laplacian < 0.5 * eq64.grid.dx**2


def test_field_equation_fixed_point(eq64):
    # phi = G * (coupling rho[phi]) is the defining identity
    target = solve_poisson(eq64.grid, eq64.coupling * eq64.rho_inf).psi
    assert np.max(np.abs(eq64.phi_inf - target)) <= 1e-10


def test_self_consistent_field_flattens_density(eq64, grid64, params):
    # repulsion pushes mass outward: the coupled density is flatter at the origin
    bare = boltzmann_density(grid64, make_potential("quadratic").V(grid64.x), params)
    assert eq64.rho_sup < np.max(bare)
    assert eq64.rho_sup == pytest.approx(np.max(eq64.rho_inf))


def test_symmetry_of_equilibrium(eq64):
    np.testing.assert_allclose(eq64.rho_inf, eq64.rho_inf[::-1], rtol=1e-12)
    np.testing.assert_allclose(eq64.grad_phi_inf + eq64.grad_phi_inf[::-1],
                               0.0, atol=1e-12)
    # W1 = V' + phi' is odd for the even quadratic well
    np.testing.assert_allclose(eq64.W1 + eq64.W1[::-1], 0.0, atol=1e-12)


def test_effective_curvature_identity(eq64):
    # W2 = V'' - coupling * rho_inf, exact from the field equation
    expected = 1.0 - eq64.coupling * eq64.rho_inf
    np.testing.assert_allclose(eq64.W2, expected, rtol=1e-13)


def test_double_well_equilibrium_converges(params):
    grid = build_grid(64, 64, 6.0, 6.0)
    pot = make_potential("double_well", r1=0.25, r2=1.0)
    eq = solve_pbe(grid, pot, params, coupling=1.0)
    assert eq.converged and eq.residual <= 1e-10
    assert eq.mass() == pytest.approx(1.0, abs=1e-13)
    # bimodal density: local minimum at the origin
    mid = grid.nx // 2
    assert eq.rho_inf[mid] < np.max(eq.rho_inf)


def test_product_structure(eq64):
    np.testing.assert_allclose(eq64.f_inf,
                               eq64.rho_inf[:, None] * eq64.M[None, :],
                               rtol=1e-14)
    np.testing.assert_allclose(eq64.sqrt_f_inf**2, eq64.f_inf, rtol=1e-14)


def test_second_init_agrees(grid64, params):
    pot = make_potential("quadratic", omega=1.0)
    eq = solve_pbe(grid64, pot, params, coupling=1.0, check_second_init=True)
    assert eq.init_gap is not None
    assert eq.init_gap < 1e-9
    assert "init_gap" in eq.summary()


def test_summary_keys(eq64):
    s = eq64.summary()
    for k in ("residual", "residual_laplacian", "iterations", "rho_sup",
              "converged", "mass", "boundary_mass", "coupling"):
        assert k in s
    # the repulsion-flattened density keeps ~1% of its mass in the outer half
    assert 0.0 < s["boundary_mass"] < 0.05


def test_nonconvergence_raises(grid64, params):
    with pytest.raises(RuntimeError, match="did not converge"):
        solve_pbe(grid64, make_potential("quadratic"), params, max_iter=2)


def test_argument_validation(grid64, params):
    pot = make_potential("quadratic")
    with pytest.raises(ValueError, match="theta_relax"):
        solve_pbe(grid64, pot, params, theta_relax=1.5)
    with pytest.raises(ValueError, match="tol"):
        solve_pbe(grid64, pot, params, tol=0.0)
    with pytest.raises(ValueError, match="max_iter"):
        solve_pbe(grid64, pot, params, max_iter=0)


def test_csv_export(tmp_path, eq64):
    p = tmp_path / "steady.csv"
    eq64.to_csv(p)
    lines = p.read_text().splitlines()
    assert lines[0] == "x,rho_inf,phi_inf"
    assert len(lines) == eq64.grid.nx + 1
    data = np.loadtxt(p, delimiter=",", skiprows=1)
    np.testing.assert_array_equal(data[:, 1], eq64.rho_inf)


def test_grid_convergence_of_density(params):
    """rho_inf on a coarse grid matches a refined solve after interpolation."""
    from scipy.interpolate import CubicSpline

    pot = make_potential("quadratic", omega=1.0)
    g1 = build_grid(64, 8, 6.0, 6.0)
    g2 = build_grid(1024, 8, 6.0, 6.0)
    r1 = solve_pbe(g1, pot, params, coupling=1.0).rho_inf
    r2 = solve_pbe(g2, pot, params, coupling=1.0).rho_inf
    interp = CubicSpline(g2.x, r2)(g1.x)
    assert np.max(np.abs(r1 - interp)) < 1e-6
