import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from vpfp.grid import build_grid
from vpfp.poisson import field_from_h, solve_poisson


def gaussian_exact(x):
    """Closed-form field of the standard normal source.

    psi(x) = -(1/2) E|x - Y|, Y ~ N(0,1), and E|x - Y| = x (2 Phi(x) - 1)
    + 2 phi(x); the gradient is -(Phi(x) - 1/2).
    """
    psi = -0.5 * (x * (2.0 * norm.cdf(x) - 1.0) + 2.0 * norm.pdf(x))
    grad = -(norm.cdf(x) - 0.5)
    return psi, grad


def gaussian_error(n):
    g = build_grid(n, 8, 8.0, 1.0)
    rho = norm.pdf(g.x)
    out = solve_poisson(g, rho)
    psi_ex, grad_ex = gaussian_exact(g.x)
    return (np.max(np.abs(out.psi - psi_ex)), np.max(np.abs(out.grad - grad_ex)))


def test_gaussian_source_oracle():
    # measured errors: 2.5e-8 / 1.3e-7 at nx = 256, falling 16x per refinement
    e_psi, e_grad = gaussian_error(256)
    assert e_psi < 5e-8
    assert e_grad < 3e-7


def test_kink_correction_gives_fourth_order():
    e1, _ = gaussian_error(64)
    e2, _ = gaussian_error(128)
    assert e1 / e2 == pytest.approx(16.0, rel=0.3)


def test_residual_is_second_order_stencil_check():
    g = build_grid(256, 8, 8.0, 1.0)
    out = solve_poisson(g, norm.pdf(g.x))
    # -psi'' = rho holds to the stencil's own O(dx^2)
    assert out.residual < 0.5 * g.dx**2


def test_shape_validation():
    g = build_grid(16, 8, 1.0, 1.0)
    with pytest.raises(ValueError, match="shape"):
        solve_poisson(g, np.zeros(17))


def test_even_source_gives_odd_gradient():
    g = build_grid(64, 8, 5.0, 1.0)
    rho = np.exp(-g.x**2)
    out = solve_poisson(g, rho)
    np.testing.assert_allclose(out.grad + out.grad[::-1], 0.0, atol=1e-14)
    np.testing.assert_allclose(out.psi - out.psi[::-1], 0.0, atol=1e-14)


def test_gradient_far_field_matches_total_charge():
    # away from a compact source, psi' -> -(total charge) * sign(x) / 2
    g = build_grid(256, 8, 10.0, 1.0)
    rho = np.where(np.abs(g.x) < 1.0, 1.0, 0.0)
    out = solve_poisson(g, rho)
    total = rho.sum() * g.dx
    assert out.grad[-1] == pytest.approx(-total / 2.0, rel=1e-12)
    assert out.grad[0] == pytest.approx(total / 2.0, rel=1e-12)


@settings(max_examples=20, deadline=None)
@given(a=st.floats(-4, 4), b=st.floats(-4, 4))
def test_solver_linearity(a, b):
    g = build_grid(32, 8, 3.0, 1.0)
    rng = np.random.default_rng(13)
    r1 = rng.normal(size=32)
    r2 = rng.normal(size=32)
    combined = solve_poisson(g, a * r1 + b * r2)
    s1 = solve_poisson(g, r1)
    s2 = solve_poisson(g, r2)
    np.testing.assert_allclose(combined.psi, a * s1.psi + b * s2.psi,
                               rtol=1e-9, atol=1e-9)
    np.testing.assert_allclose(combined.grad, a * s1.grad + b * s2.grad,
                               rtol=1e-9, atol=1e-9)


def test_field_from_h_coupling_scaling(eq64):
    g = eq64.grid
    X, V = g.meshes()
    h = np.sin(np.pi * X / g.Lx) * np.exp(-0.5 * V**2)
    base = field_from_h(g, h, eq64.f_inf, coupling=1.0)
    double = field_from_h(g, h, eq64.f_inf, coupling=2.0)
    np.testing.assert_allclose(double.grad, 2.0 * base.grad, rtol=1e-12)
    with pytest.raises(ValueError, match="shapes"):
        field_from_h(g, h[:, :4], eq64.f_inf)


def test_field_from_h_source_is_velocity_marginal(eq64):
    g = eq64.grid
    rng = np.random.default_rng(2)
    h = rng.normal(size=g.shape())
    out = field_from_h(g, h, eq64.f_inf)
    src = (h * eq64.f_inf).sum(axis=1) * g.dv
    np.testing.assert_allclose(out.psi, solve_poisson(g, src).psi, rtol=1e-13)
