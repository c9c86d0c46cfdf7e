import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vpfp.grid import (Field, PhaseGrid, XField, build_grid, diff1, diff2,
                       field_from_csv, field_to_csv, fractional_x_norm,
                       grad_v, grad_x, integrate, integrate_v, integrate_x,
                       v_moment, weighted_norm_sq, xfield_to_csv)


def test_nodes_are_cell_centered_and_symmetric():
    g = build_grid(16, 12, 3.0, 2.0)
    assert g.dx == pytest.approx(6.0 / 16)
    assert g.dv == pytest.approx(4.0 / 12)
    assert g.x[0] == pytest.approx(-3.0 + g.dx / 2)
    assert g.x[-1] == pytest.approx(3.0 - g.dx / 2)
    # symmetry about 0 holds exactly for any cell count
    np.testing.assert_allclose(g.x + g.x[::-1], 0.0, atol=1e-15)
    np.testing.assert_allclose(g.v + g.v[::-1], 0.0, atol=1e-15)
    assert g.cell_weight == pytest.approx(g.dx * g.dv)


def test_grid_validation():
    with pytest.raises(ValueError, match="too coarse"):
        PhaseGrid(4, 64, 6.0, 6.0)
    with pytest.raises(ValueError, match="half-widths"):
        PhaseGrid(16, 16, -1.0, 6.0)


def test_field_shape_validation():
    g = build_grid(8, 8, 1.0, 1.0)
    with pytest.raises(ValueError, match="shape"):
        Field(g, np.zeros((8, 9)))
    with pytest.raises(ValueError, match="shape"):
        XField(g, np.zeros(9))
    with pytest.raises(FloatingPointError):
        Field(g, np.full((8, 8), np.nan)).check_finite()


def test_meshes_broadcast():
    g = build_grid(8, 10, 1.0, 1.0)
    X, V = g.meshes()
    assert X.shape == (8, 1) and V.shape == (1, 10)
    assert (X + V).shape == g.shape()


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

def test_integrate_constant_is_exact():
    g = build_grid(32, 16, 2.0, 3.0)
    ones = np.ones(g.shape())
    # midpoint rule integrates constants exactly: area = 4 Lx Lv
    assert integrate(g, ones) == pytest.approx(4.0 * 2.0 * 3.0, rel=1e-15)
    assert integrate(g, ones, weight=2.0 * ones) == pytest.approx(48.0, rel=1e-15)


def test_integrate_gaussian_oracle():
    # spectral accuracy of midpoint sums of fast-decaying smooth integrands
    g = build_grid(64, 64, 8.0, 8.0)
    X, V = g.meshes()
    vals = np.exp(-0.5 * (X**2 + V**2))
    assert integrate(g, vals) == pytest.approx(2.0 * np.pi, rel=1e-12)


def test_marginals_and_moments():
    g = build_grid(16, 64, 2.0, 6.0)
    X, V = g.meshes()
    f = np.exp(-0.5 * V**2) / np.sqrt(2 * np.pi) * np.cosh(X)
    rho = integrate_v(g, f)
    np.testing.assert_allclose(rho, np.cosh(g.x), rtol=1e-8)
    # first moment of the even Maxwellian vanishes by symmetry
    np.testing.assert_allclose(v_moment(g, f, 1), 0.0, atol=1e-14)
    np.testing.assert_allclose(v_moment(g, f, 2), np.cosh(g.x), rtol=1e-7)
    assert integrate_x(g, np.ones(16)) == pytest.approx(4.0)


@settings(max_examples=25, deadline=None)
@given(a=st.floats(-5, 5), b=st.floats(-5, 5))
def test_integrate_is_linear(a, b):
    g = build_grid(8, 8, 1.0, 1.0)
    rng = np.random.default_rng(7)
    f1 = rng.normal(size=g.shape())
    f2 = rng.normal(size=g.shape())
    lhs = integrate(g, a * f1 + b * f2)
    rhs = a * integrate(g, f1) + b * integrate(g, f2)
    assert lhs == pytest.approx(rhs, abs=1e-10)


# ---------------------------------------------------------------------------
# stencils
# ---------------------------------------------------------------------------

def test_diff1_exact_on_quadratics():
    # centered interior and 3-point one-sided edges are both exact for x^2
    x = np.linspace(0.0, 3.0, 31)
    np.testing.assert_allclose(diff1(x**2, x[1] - x[0]), 2.0 * x, atol=1e-12)


def test_diff2_exact_on_cubics():
    x = np.linspace(-1.0, 2.0, 25)
    h = x[1] - x[0]
    np.testing.assert_allclose(diff2(x**2, h), 2.0, atol=1e-10)


def test_diff_second_order_convergence():
    def err(n):
        g = build_grid(n, 8, np.pi, 1.0)
        vals = np.sin(g.x)[:, None] * np.ones((1, 8))
        return np.max(np.abs(grad_x(g, vals) - np.cos(g.x)[:, None]))

    e1, e2 = err(64), err(128)
    assert e1 / e2 == pytest.approx(4.0, rel=0.15)


def test_diff_axis_selection():
    g = build_grid(8, 16, 1.0, 2.0)
    X, V = g.meshes()
    f = X * np.ones_like(V) + 3.0 * V * np.ones_like(X)
    np.testing.assert_allclose(grad_x(g, f), 1.0, atol=1e-12)
    np.testing.assert_allclose(grad_v(g, f), 3.0, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3))
def test_diff1_is_linear(a, b):
    rng = np.random.default_rng(11)
    f1 = rng.normal(size=(12, 9))
    f2 = rng.normal(size=(12, 9))
    lhs = diff1(a * f1 + b * f2, 0.1, axis=1)
    rhs = a * diff1(f1, 0.1, axis=1) + b * diff1(f2, 0.1, axis=1)
    np.testing.assert_allclose(lhs, rhs, atol=1e-9)


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------

def test_weighted_norm_rejects_negative_weight():
    g = build_grid(8, 8, 1.0, 1.0)
    w = np.ones(g.shape())
    w[0, 0] = -1.0
    with pytest.raises(ValueError, match="negative"):
        weighted_norm_sq(g, np.ones(g.shape()), w)


def test_weighted_norm_value():
    g = build_grid(8, 8, 1.0, 1.0)
    h = 2.0 * np.ones(g.shape())
    assert weighted_norm_sq(g, h, np.ones(g.shape())) == pytest.approx(16.0)


@settings(max_examples=25, deadline=None)
@given(c=st.floats(-10, 10))
def test_weighted_norm_homogeneity(c):
    g = build_grid(8, 8, 1.0, 1.0)
    rng = np.random.default_rng(3)
    h = rng.normal(size=g.shape())
    w = rng.uniform(0.1, 1.0, size=g.shape())
    assert weighted_norm_sq(g, c * h, w) == pytest.approx(
        c * c * weighted_norm_sq(g, h, w), rel=1e-12, abs=1e-12)


def test_fractional_norm_alpha_zero_is_weighted_l2():
    g = build_grid(32, 16, 4.0, 4.0)
    X, V = g.meshes()
    h = np.sin(X) * np.exp(-0.3 * V**2)
    w = np.exp(-0.5 * (X**2 + V**2))
    l2 = np.sqrt(weighted_norm_sq(g, h, w))
    assert fractional_x_norm(g, h, w, 0.0) == pytest.approx(l2, rel=1e-12)


def test_fractional_norm_monotone_in_alpha():
    g = build_grid(64, 16, 6.0, 4.0)
    X, V = g.meshes()
    h = np.sin(3.0 * X) * np.exp(-0.3 * V**2)
    w = np.exp(-0.5 * (X**2 + V**2))
    norms = [fractional_x_norm(g, h, w, a) for a in (0.0, 0.3, 0.6, 1.0)]
    assert np.all(np.diff(norms) > 0.0)


def test_fractional_norm_alpha_bounds():
    g = build_grid(8, 8, 1.0, 1.0)
    h = np.ones(g.shape())
    with pytest.raises(ValueError, match="alpha"):
        fractional_x_norm(g, h, h, 1.5)


# ---------------------------------------------------------------------------
# CSV round trip
# ---------------------------------------------------------------------------

def test_field_csv_roundtrip_bitexact(tmp_path):
    g = build_grid(16, 12, 2.0, 3.0)
    rng = np.random.default_rng(5)
    f = Field(g, rng.normal(size=g.shape()))
    p = tmp_path / "field.csv"
    field_to_csv(f, p)
    back = field_from_csv(p)
    assert np.array_equal(back.values, f.values)
    assert np.array_equal(back.grid.x, g.x)
    assert np.array_equal(back.grid.v, g.v)


def test_field_csv_header_and_locale(tmp_path):
    g = build_grid(8, 8, 1.0, 1.0)
    p = tmp_path / "f.csv"
    field_to_csv(Field(g, np.zeros(g.shape())), p)
    text = p.read_text()
    assert text.splitlines()[0] == "x,v,value"
    assert "," in text and ";" not in text
    assert text.endswith("\n") and "\r" not in text


def test_xfield_csv_columns(tmp_path):
    g = build_grid(8, 8, 1.0, 1.0)
    p = tmp_path / "x.csv"
    xfield_to_csv(g, {"rho": np.arange(8.0), "phi": np.ones(8)}, p)
    lines = p.read_text().splitlines()
    assert lines[0] == "x,rho,phi"
    assert len(lines) == 9


def test_field_from_csv_rejects_ragged(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("x,v,value\n0,0,1\n0,1,2\n1,0,3\n")
    with pytest.raises(ValueError, match="tensor"):
        field_from_csv(p)
