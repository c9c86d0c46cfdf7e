"""Truncated phase-space grid, quadrature, stencils, and weighted norms.

Everything downstream lives on a uniform cell-centered tensor grid over
[-Lx, Lx] x [-Lv, Lv]: position along axis 0, velocity along axis 1.
Integrals are midpoint-rule sums (weight dx*dv per node), derivatives are
second-order centered differences with one-sided closures at the truncation
boundary, and the fractional x-norm is evaluated with a periodic FFT along x
-- legitimate because every field it is applied to carries a factor
f_inf^(1/2) that vanishes to ~1e-10 at the boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

Array = NDArray[np.float64]

__all__ = [
    "PhaseGrid",
    "Field",
    "XField",
    "build_grid",
    "integrate",
    "integrate_x",
    "integrate_v",
    "v_moment",
    "grad_x",
    "grad_v",
    "diff1",
    "diff2",
    "weighted_norm_sq",
    "fractional_x_norm",
    "field_to_csv",
    "field_from_csv",
    "xfield_to_csv",
]


@dataclass(frozen=True)
class PhaseGrid:
    """Uniform cell-centered grid on [-Lx, Lx] x [-Lv, Lv].

    Node coordinates are x_i = -Lx + (i+1/2)dx and v_j = -Lv + (j+1/2)dv,
    symmetric about 0 in both directions for any cell count.
    """

    nx: int
    nv: int
    Lx: float
    Lv: float
    x: Array = field(init=False, repr=False, compare=False)
    v: Array = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.nx < 8 or self.nv < 8:
            raise ValueError(f"grid too coarse: nx={self.nx}, nv={self.nv} (need >= 8)")
        if self.Lx <= 0 or self.Lv <= 0:
            raise ValueError(f"domain half-widths must be positive, got Lx={self.Lx}, Lv={self.Lv}")
        object.__setattr__(self, "x", -self.Lx + (np.arange(self.nx) + 0.5) * self.dx)
        object.__setattr__(self, "v", -self.Lv + (np.arange(self.nv) + 0.5) * self.dv)

    @property
    def dx(self) -> float:
        return 2.0 * self.Lx / self.nx

    @property
    def dv(self) -> float:
        return 2.0 * self.Lv / self.nv

    @property
    def cell_weight(self) -> float:
        """Midpoint quadrature weight per node."""
        return self.dx * self.dv

    def meshes(self) -> tuple[Array, Array]:
        """Broadcastable coordinate arrays X (nx,1) and V (1,nv)."""
        return self.x[:, None], self.v[None, :]

    def shape(self) -> tuple[int, int]:
        return (self.nx, self.nv)


def build_grid(nx: int, nv: int, Lx: float, Lv: float) -> PhaseGrid:
    return PhaseGrid(int(nx), int(nv), float(Lx), float(Lv))


@dataclass(frozen=True)
class Field:
    """Scalar field on a PhaseGrid, values[i, j] = value at (x_i, v_j)."""

    grid: PhaseGrid
    values: Array

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != self.grid.shape():
            raise ValueError(f"field shape {vals.shape} != grid shape {self.grid.shape()}")
        object.__setattr__(self, "values", vals)

    def check_finite(self) -> "Field":
        if not np.all(np.isfinite(self.values)):
            raise FloatingPointError("field contains non-finite entries")
        return self


@dataclass(frozen=True)
class XField:
    """Function of x only (psi, rho_inf, V, ...)."""

    grid: PhaseGrid
    values: Array

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != (self.grid.nx,):
            raise ValueError(f"xfield shape {vals.shape} != ({self.grid.nx},)")
        object.__setattr__(self, "values", vals)


def _same_grid(a, b) -> None:
    if a.grid is not b.grid and a.grid != b.grid:
        raise ValueError("fields live on different grids")


# ---------------------------------------------------------------------------
# quadrature

def integrate(grid: PhaseGrid, values: Array, weight: Array | None = None) -> float:
    """Midpoint-rule integral of values (optionally times weight) over the box."""
    if weight is None:
        return float(values.sum() * grid.cell_weight)
    return float((values * weight).sum() * grid.cell_weight)


def integrate_x(grid: PhaseGrid, values: Array) -> float:
    return float(values.sum() * grid.dx)


def integrate_v(grid: PhaseGrid, values: Array) -> Array:
    """v-marginal: integral over v of a (nx, nv) array, returning shape (nx,)."""
    return values.sum(axis=1) * grid.dv


def v_moment(grid: PhaseGrid, values: Array, power: int = 1) -> Array:
    return (values * grid.v[None, :] ** power).sum(axis=1) * grid.dv


# ---------------------------------------------------------------------------
# stencils

def diff1(a: Array, h: float, axis: int = 0) -> Array:
    """Second-order first derivative: centered interior, one-sided edges."""
    a = np.moveaxis(a, axis, 0)
    out = np.empty_like(a)
    out[1:-1] = (a[2:] - a[:-2]) / (2.0 * h)
    out[0] = (-3.0 * a[0] + 4.0 * a[1] - a[2]) / (2.0 * h)
    out[-1] = (3.0 * a[-1] - 4.0 * a[-2] + a[-3]) / (2.0 * h)
    return np.moveaxis(out, 0, axis)


def diff2(a: Array, h: float, axis: int = 0) -> Array:
    """Second-order second derivative; 4-point one-sided closure at edges."""
    a = np.moveaxis(a, axis, 0)
    out = np.empty_like(a)
    h2 = h * h
    out[1:-1] = (a[2:] - 2.0 * a[1:-1] + a[:-2]) / h2
    out[0] = (2.0 * a[0] - 5.0 * a[1] + 4.0 * a[2] - a[3]) / h2
    out[-1] = (2.0 * a[-1] - 5.0 * a[-2] + 4.0 * a[-3] - a[-4]) / h2
    return np.moveaxis(out, 0, axis)


def grad_x(grid: PhaseGrid, values: Array) -> Array:
    return diff1(values, grid.dx, axis=0)


def grad_v(grid: PhaseGrid, values: Array) -> Array:
    return diff1(values, grid.dv, axis=1)


# ---------------------------------------------------------------------------
# norms

def weighted_norm_sq(grid: PhaseGrid, h: Array, w: Array) -> float:
    """integral of h^2 w dx dv; w must be nonnegative."""
    if np.any(w < 0):
        raise ValueError("weight has negative entries")
    return float((h * h * w).sum() * grid.cell_weight)


def fractional_x_norm(grid: PhaseGrid, h: Array, f_inf: Array, alpha: float) -> float:
    """Weighted H^alpha_x norm of h.

    Computes || (1 - Lap_x)^(alpha/2) (h f_inf^(1/2)) ||_{L^2} via an FFT
    along x with multiplier (1 + 4 pi^2 xi^2)^(alpha/2), xi in cycles per
    unit length (Fourier convention with e^{-2 pi i x xi}). alpha = 0
    recovers the weighted L^2 norm exactly.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    g = h * np.sqrt(f_inf)
    ghat = np.fft.rfft(g, axis=0)
    xi = np.fft.rfftfreq(grid.nx, d=grid.dx)
    mult = (1.0 + 4.0 * np.pi**2 * xi**2) ** (0.5 * alpha)
    spec = (np.abs(ghat) ** 2) * mult[:, None] ** 2
    # Parseval for rfft: double every bin except DC and (for even n) Nyquist.
    scale = np.full(spec.shape[0], 2.0)
    scale[0] = 1.0
    if grid.nx % 2 == 0:
        scale[-1] = 1.0
    total = float((spec * scale[:, None]).sum()) / grid.nx
    return float(np.sqrt(total * grid.cell_weight))


# ---------------------------------------------------------------------------
# CSV serialization (17 significant digits => exact float64 round-trip)

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def field_to_csv(f: Field, path) -> None:
    g = f.grid
    with open(path, "w", newline="\n") as fh:
        fh.write("x,v,value\n")
        for i in range(g.nx):
            xi = _fmt(g.x[i])
            row = f.values[i]
            for j in range(g.nv):
                fh.write(f"{xi},{_fmt(g.v[j])},{_fmt(row[j])}\n")


def field_from_csv(path) -> Field:
    data = np.loadtxt(path, delimiter=",", skiprows=1, dtype=np.float64)
    x = np.unique(data[:, 0])
    v = np.unique(data[:, 1])
    nx, nv = x.size, v.size
    if nx * nv != data.shape[0]:
        raise ValueError(f"CSV is not a full tensor grid: {data.shape[0]} rows, {nx}x{nv} nodes")
    dx = x[1] - x[0]
    dv = v[1] - v[0]
    grid = build_grid(nx, nv, nx * dx / 2.0, nv * dv / 2.0)
    # Carry the parsed coordinates so a round-trip is bit-identical even when
    # the reconstructed extents differ from the originals in the last ulp.
    object.__setattr__(grid, "x", x)
    object.__setattr__(grid, "v", v)
    return Field(grid, data[:, 2].reshape(nx, nv))


def xfield_to_csv(grid: PhaseGrid, columns: dict[str, Array], path) -> None:
    """Write x plus named columns (e.g. rho_inf, phi_inf) as CSV."""
    names = list(columns)
    with open(path, "w", newline="\n") as fh:
        fh.write("x," + ",".join(names) + "\n")
        for i in range(grid.nx):
            vals = ",".join(_fmt(columns[n][i]) for n in names)
            fh.write(f"{_fmt(grid.x[i])},{vals}\n")
