"""MAC staggered-grid discretization of the unit square lid-driven cavity.

Layout: pressure at cell centers (nx, ny); u at vertical faces (nx+1, ny)
located at (i*h, (j+1/2)*h); v at horizontal faces (nx, ny+1) located at
((i+1/2)*h, j*h).  Normal velocities on walls are stored boundary entries
(always zero for the cavity); tangential wall values (including the moving
lid) enter through the ghost convention ghost = 2*bc - interior.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np


class ShapeError(ValueError):
    """Raised when a field does not conform to its grid."""


@dataclass(frozen=True)
class MacGrid:
    nx: int
    ny: int

    def __post_init__(self):
        if self.nx != self.ny:
            raise ValueError("cavity grid must be square (nx == ny)")
        if self.nx < 4:
            raise ValueError("grid too coarse (nx >= 4 required)")

    @property
    def h(self) -> float:
        return 1.0 / self.nx

    @property
    def u_shape(self):
        return (self.nx + 1, self.ny)

    @property
    def v_shape(self):
        return (self.nx, self.ny + 1)

    @property
    def p_shape(self):
        return (self.nx, self.ny)

    @property
    def n_u_interior(self) -> int:
        return (self.nx - 1) * self.ny

    @property
    def n_v_interior(self) -> int:
        return self.nx * (self.ny - 1)


@dataclass(frozen=True)
class BoundaryData:
    """Dirichlet data for the cavity: tangential lid on top, zero elsewhere."""

    lid_speed: float = 1.0


HOMOGENEOUS = BoundaryData(lid_speed=0.0)


@dataclass
class VelocityField:
    u: np.ndarray
    v: np.ndarray

    def copy(self) -> "VelocityField":
        return VelocityField(self.u.copy(), self.v.copy())

    def __add__(self, other):
        return VelocityField(self.u + other.u, self.v + other.v)

    def __sub__(self, other):
        return VelocityField(self.u - other.u, self.v - other.v)

    def __mul__(self, s: float):
        return VelocityField(self.u * s, self.v * s)

    __rmul__ = __mul__


@dataclass
class PressureField:
    p: np.ndarray


def zero_velocity(g: MacGrid) -> VelocityField:
    return VelocityField(np.zeros(g.u_shape), np.zeros(g.v_shape))


def check_shapes(g: MacGrid, w: VelocityField):
    if w.u.shape != g.u_shape or w.v.shape != g.v_shape:
        raise ShapeError(
            f"field shapes {w.u.shape}/{w.v.shape} do not match grid "
            f"{g.u_shape}/{g.v_shape}"
        )


def divergence(g: MacGrid, w: VelocityField) -> np.ndarray:
    """Cell-centered divergence, exact for linear fields."""
    check_shapes(g, w)
    h = g.h
    return (w.u[1:, :] - w.u[:-1, :]) / h + (w.v[:, 1:] - w.v[:, :-1]) / h


def _u_with_ghosts(g: MacGrid, u: np.ndarray, bc: BoundaryData) -> np.ndarray:
    """u padded with one ghost row below and above (tangential walls)."""
    ug = np.empty((g.nx + 1, g.ny + 2))
    ug[:, 1:-1] = u
    ug[:, 0] = -u[:, 0]                       # bottom wall, u = 0
    ug[:, -1] = 2.0 * bc.lid_speed - u[:, -1]  # lid, u = lid_speed
    return ug


def _v_with_ghosts(g: MacGrid, v: np.ndarray) -> np.ndarray:
    """v padded with one ghost column left and right (tangential walls, v=0)."""
    vg = np.empty((g.nx + 2, g.ny + 1))
    vg[1:-1, :] = v
    vg[0, :] = -v[0, :]
    vg[-1, :] = -v[-1, :]
    return vg


def vector_laplacian(g: MacGrid, w: VelocityField, bc: BoundaryData) -> VelocityField:
    """5-point Laplacian at interior faces; boundary-face entries are zero."""
    check_shapes(g, w)
    h2 = g.h * g.h
    ug = _u_with_ghosts(g, w.u, bc)
    lap_u = np.zeros(g.u_shape)
    lap_u[1:-1, :] = (
        w.u[2:, :] - 2.0 * w.u[1:-1, :] + w.u[:-2, :]
        + ug[1:-1, 2:] - 2.0 * ug[1:-1, 1:-1] + ug[1:-1, :-2]
    ) / h2
    vg = _v_with_ghosts(g, w.v)
    lap_v = np.zeros(g.v_shape)
    lap_v[:, 1:-1] = (
        w.v[:, 2:] - 2.0 * w.v[:, 1:-1] + w.v[:, :-2]
        + vg[2:, 1:-1] - 2.0 * vg[1:-1, 1:-1] + vg[:-2, 1:-1]
    ) / h2
    return VelocityField(lap_u, lap_v)


def convection_coefficients(g: MacGrid, a: VelocityField):
    """Face-interpolated advecting velocities used by the skew form.

    Returns (au_cell, av_corner, av_cell, au_corner):
      au_cell:   a.u averaged to cell centers, shape (nx, ny)
      av_corner: a.v averaged to vertical-face corners, shape (nx-1, ny+1)
                 (corner (i, j) for interior u-columns i = 1..nx-1)
      av_cell:   a.v averaged to cell centers, shape (nx, ny)
      au_corner: a.u averaged to horizontal-face corners, shape (nx+1, ny-1)
                 (corner (i, j) for interior v-rows j = 1..ny-1)
    """
    check_shapes(g, a)
    au_cell = 0.5 * (a.u[:-1, :] + a.u[1:, :])
    av_corner = 0.5 * (a.v[:-1, :] + a.v[1:, :])
    av_cell = 0.5 * (a.v[:, :-1] + a.v[:, 1:])
    au_corner = 0.5 * (a.u[:, :-1] + a.u[:, 1:])
    return au_cell, av_corner, av_cell, au_corner


def convect(g: MacGrid, a: VelocityField, w: VelocityField, bc: BoundaryData) -> VelocityField:
    """Skew-symmetric convection: average of divergence and advective forms.

    With centered face interpolation the averaged form collapses to the
    antisymmetric stencil (abar_E w_E - abar_W w_W) / (2h) per direction,
    which satisfies <convect(a, w), w> = 0 exactly whenever a has zero
    normal velocity on the walls and w is homogeneous.
    """
    check_shapes(g, a)
    check_shapes(g, w)
    two_h = 2.0 * g.h
    au_cell, av_corner, av_cell, au_corner = convection_coefficients(g, a)

    cu = np.zeros(g.u_shape)
    # x-direction: neighbors are u-faces, coefficients at cell centers.
    cu[1:-1, :] = (au_cell[1:, :] * w.u[2:, :] - au_cell[:-1, :] * w.u[:-2, :]) / two_h
    # y-direction: neighbors via ghosts, coefficients at corners.  The corner
    # coefficients on the walls vanish for BC-conforming a, so the ghost
    # values are inert there.
    ug = _u_with_ghosts(g, w.u, bc)
    cu[1:-1, :] += (av_corner[:, 1:] * ug[1:-1, 2:] - av_corner[:, :-1] * ug[1:-1, :-2]) / two_h

    cv = np.zeros(g.v_shape)
    cv[:, 1:-1] = (av_cell[:, 1:] * w.v[:, 2:] - av_cell[:, :-1] * w.v[:, :-2]) / two_h
    vg = _v_with_ghosts(g, w.v)
    cv[:, 1:-1] += (au_corner[1:, :] * vg[2:, 1:-1] - au_corner[:-1, :] * vg[:-2, 1:-1]) / two_h
    return VelocityField(cu, cv)


def dot_interior(g: MacGrid, a: VelocityField, b: VelocityField) -> float:
    """h^2-weighted inner product over interior faces."""
    s = np.dot(a.u[1:-1, :].ravel(), b.u[1:-1, :].ravel())
    s += np.dot(a.v[:, 1:-1].ravel(), b.v[:, 1:-1].ravel())
    return float(s) * g.h * g.h


def discrete_inner_product_h1(g: MacGrid, w1: VelocityField, w2: VelocityField) -> float:
    """H1-seminorm inner product <grad w1, grad w2> for homogeneous fields.

    Realized as <-Lap_h w1, w2> h^2 with the homogeneous-BC Laplacian, which
    equals the face-gradient sum by discrete summation by parts and keeps the
    quadratic form identical to the Stokes/Riesz operator.
    """
    lap = vector_laplacian(g, w1, HOMOGENEOUS)
    return -dot_interior(g, lap, w2)


def pack_interior(g: MacGrid, w: VelocityField) -> np.ndarray:
    """Flatten interior-face values into the unknown ordering [u; v]."""
    check_shapes(g, w)
    return np.concatenate([w.u[1:-1, :].ravel(), w.v[:, 1:-1].ravel()])


def unpack_interior(g: MacGrid, x: np.ndarray) -> VelocityField:
    """Inverse of pack_interior; boundary faces are set to zero."""
    nu = g.n_u_interior
    w = zero_velocity(g)
    w.u[1:-1, :] = x[:nu].reshape(g.nx - 1, g.ny)
    w.v[:, 1:-1] = x[nu:nu + g.n_v_interior].reshape(g.nx, g.ny - 1)
    return w


def streamfunction_velocity(g: MacGrid, psi: np.ndarray) -> VelocityField:
    """Exactly divergence-free field from a corner streamfunction.

    psi has shape (nx+1, ny+1); constant boundary values give zero normal
    velocity on the walls.
    """
    if psi.shape != (g.nx + 1, g.ny + 1):
        raise ShapeError("streamfunction must live on grid corners")
    h = g.h
    u = (psi[:, 1:] - psi[:, :-1]) / h
    v = -(psi[1:, :] - psi[:-1, :]) / h
    return VelocityField(u, v)


def save_field_csv(g: MacGrid, w: VelocityField, path):
    """Debug dump: rows of (component, i, j, value)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["component", "i", "j", "value"])
        for name, arr in (("u", w.u), ("v", w.v)):
            for (i, j), val in np.ndenumerate(arr):
                writer.writerow([name, i, j, repr(float(val))])


def load_field_csv(g: MacGrid, path) -> VelocityField:
    w = zero_velocity(g)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            arr = w.u if row["component"] == "u" else w.v
            arr[int(row["i"]), int(row["j"])] = float(row["value"])
    return w
