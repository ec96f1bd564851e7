"""Navier-Stokes fixed-point layer: Oseen (Picard) solves, the nonlinear
residual, dual-norm evaluation via Stokes-type Riesz solves, and the runtime
check of the residual/step inequality.

Unknown ordering for all saddle-point systems: interior u faces, interior v
faces, then all pressures.  The pressure nullspace is removed by pinning the
continuity row of cell (0, 0); mean-zero pressure is restored after the solve.
The dropped continuity equation is implied by the others since the cavity
boundary data has zero net flux.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import sparse
from .grid import (
    BoundaryData,
    HOMOGENEOUS,
    MacGrid,
    PressureField,
    VelocityField,
    check_shapes,
    convect,
    convection_coefficients,
    discrete_inner_product_h1,
    divergence,
    dot_interior,
    pack_interior,
    unpack_interior,
    vector_laplacian,
    zero_velocity,
)

LEMMA_SLACK = 1e-10


@dataclass
class FlowProblem:
    """Immutable description of a cavity flow at viscosity nu.

    f is an optional body force given at faces (VelocityField); None means
    zero.  The Stokes factorization for dual-norm solves is cached lazily.
    """

    grid: MacGrid
    nu: float
    bc: BoundaryData = field(default_factory=BoundaryData)
    f: VelocityField | None = None

    def __post_init__(self):
        if self.nu <= 0:
            raise ValueError("viscosity nu must be positive")
        if self.f is not None:
            check_shapes(self.grid, self.f)
        self._stokes_lu = None
        self._proj_lu = None

    def stokes_factors(self) -> sparse.LuFactors:
        """Factorization of [-Lap, G; Div, 0]; computed once per problem."""
        if self._stokes_lu is None:
            a_mat, _ = _assemble_saddle(self.grid, 1.0, None, HOMOGENEOUS)
            self._stokes_lu = sparse.lu_factor(a_mat)
        return self._stokes_lu

    def projection_factors(self) -> sparse.LuFactors:
        """Factorization of the cell-centered Poisson operator Div∘G.

        Used by the Leray projection of momentum residuals; computed once.
        """
        if self._proj_lu is None:
            self._proj_lu = sparse.lu_factor(_assemble_projection(self.grid))
        return self._proj_lu


@dataclass
class Residual:
    """Momentum residual at interior faces, with lazily-filled dual data."""

    grid: MacGrid
    momentum: np.ndarray
    l2_norm: float
    representer: VelocityField | None = None
    multiplier: PressureField | None = None
    vprime_norm: float | None = None
    proj_momentum: np.ndarray | None = None
    l2_proj_norm: float | None = None


@dataclass
class PicardStep:
    u_new: VelocityField
    p_new: PressureField
    w: VelocityField
    w_h1: float


def _index_maps(g: MacGrid):
    nx, ny = g.nx, g.ny
    nu_i, nv_i = g.n_u_interior, g.n_v_interior

    def iu(i, j):
        return (i - 1) * ny + j

    def iv(i, j):
        return nu_i + i * (ny - 1) + (j - 1)

    def ip(i, j):
        return nu_i + nv_i + i * ny + j

    return iu, iv, ip, nu_i + nv_i + nx * ny


def _assemble_saddle(g: MacGrid, nu: float, a: VelocityField | None, bc: BoundaryData):
    """Coupled system [nu*(-Lap) + C(a), G; Div, 0] with pinned pressure.

    Returns (matrix, rhs_bc) where rhs_bc carries the lid contributions of
    the viscous ghost stencil.  Convection wall legs are omitted: their
    corner-interpolated coefficients vanish for BC-conforming a.
    """
    nx, ny = g.nx, g.ny
    h = g.h
    inv_h2 = 1.0 / (h * h)
    iu, iv, ip, n = _index_maps(g)
    rows, cols, vals = [], [], []
    rhs = np.zeros(n)

    def add(r, c, v):
        rows.append(np.asarray(r).ravel())
        cols.append(np.asarray(c).ravel())
        vals.append(np.asarray(v).ravel())

    # --- u-momentum rows: i = 1..nx-1, j = 0..ny-1 -------------------------
    I, J = np.meshgrid(np.arange(1, nx), np.arange(ny), indexing="ij")
    R = iu(I, J)
    diag_y = np.where((J == 0) | (J == ny - 1), 3.0, 2.0)
    add(R, R, nu * inv_h2 * (2.0 + diag_y))
    m = I - 1 >= 1
    add(R[m], iu(I[m] - 1, J[m]), np.full(m.sum(), -nu * inv_h2))
    m = I + 1 <= nx - 1
    add(R[m], iu(I[m] + 1, J[m]), np.full(m.sum(), -nu * inv_h2))
    m = J - 1 >= 0
    add(R[m], iu(I[m], J[m] - 1), np.full(m.sum(), -nu * inv_h2))
    m = J + 1 <= ny - 1
    add(R[m], iu(I[m], J[m] + 1), np.full(m.sum(), -nu * inv_h2))
    rhs[R[:, ny - 1]] += 2.0 * nu * inv_h2 * bc.lid_speed
    # pressure gradient (p[i,j] - p[i-1,j]) / h
    add(R, ip(I, J), np.full(R.size, 1.0 / h))
    add(R, ip(I - 1, J), np.full(R.size, -1.0 / h))

    if a is not None:
        au_cell, av_corner, av_cell, au_corner = convection_coefficients(g, a)
        two_h = 2.0 * h
        m = I + 1 <= nx - 1
        add(R[m], iu(I[m] + 1, J[m]), au_cell[I[m], J[m]] / two_h)
        m = I - 1 >= 1
        add(R[m], iu(I[m] - 1, J[m]), -au_cell[I[m] - 1, J[m]] / two_h)
        m = J + 1 <= ny - 1
        add(R[m], iu(I[m], J[m] + 1), av_corner[I[m] - 1, J[m] + 1] / two_h)
        m = J - 1 >= 0
        add(R[m], iu(I[m], J[m] - 1), -av_corner[I[m] - 1, J[m]] / two_h)

    # --- v-momentum rows: i = 0..nx-1, j = 1..ny-1 -------------------------
    I, J = np.meshgrid(np.arange(nx), np.arange(1, ny), indexing="ij")
    R = iv(I, J)
    diag_x = np.where((I == 0) | (I == nx - 1), 3.0, 2.0)
    add(R, R, nu * inv_h2 * (2.0 + diag_x))
    m = J - 1 >= 1
    add(R[m], iv(I[m], J[m] - 1), np.full(m.sum(), -nu * inv_h2))
    m = J + 1 <= ny - 1
    add(R[m], iv(I[m], J[m] + 1), np.full(m.sum(), -nu * inv_h2))
    m = I - 1 >= 0
    add(R[m], iv(I[m] - 1, J[m]), np.full(m.sum(), -nu * inv_h2))
    m = I + 1 <= nx - 1
    add(R[m], iv(I[m] + 1, J[m]), np.full(m.sum(), -nu * inv_h2))
    add(R, ip(I, J), np.full(R.size, 1.0 / h))
    add(R, ip(I, J - 1), np.full(R.size, -1.0 / h))

    if a is not None:
        m = J + 1 <= ny - 1
        add(R[m], iv(I[m], J[m] + 1), av_cell[I[m], J[m]] / two_h)
        m = J - 1 >= 1
        add(R[m], iv(I[m], J[m] - 1), -av_cell[I[m], J[m] - 1] / two_h)
        m = I + 1 <= nx - 1
        add(R[m], iv(I[m] + 1, J[m]), au_corner[I[m] + 1, J[m] - 1] / two_h)
        m = I - 1 >= 0
        add(R[m], iv(I[m] - 1, J[m]), -au_corner[I[m], J[m] - 1] / two_h)

    # --- continuity rows (cell (0,0) pinned to p = 0) ----------------------
    I, J = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    pinned = (I == 0) & (J == 0)
    I, J = I[~pinned], J[~pinned]
    R = ip(I, J)
    m = I + 1 <= nx - 1
    add(R[m], iu(I[m] + 1, J[m]), np.full(m.sum(), 1.0 / h))
    m = I >= 1
    add(R[m], iu(I[m], J[m]), np.full(m.sum(), -1.0 / h))
    m = J + 1 <= ny - 1
    add(R[m], iv(I[m], J[m] + 1), np.full(m.sum(), 1.0 / h))
    m = J >= 1
    add(R[m], iv(I[m], J[m]), np.full(m.sum(), -1.0 / h))
    add([ip(0, 0)], [ip(0, 0)], [1.0])

    mat = sparse.assemble_arrays(
        np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), n, n
    )
    return mat, rhs


def _split_solution(g: MacGrid, x: np.ndarray):
    n_vel = g.n_u_interior + g.n_v_interior
    vel = unpack_interior(g, x[:n_vel])
    p = x[n_vel:].reshape(g.p_shape).copy()
    p -= p.mean()
    return vel, PressureField(p)


def _assemble_projection(g: MacGrid) -> sparse.SparseMatrix:
    """Cell-centered Poisson operator Div∘G with cell (0,0) pinned.

    G maps cell values to interior faces (zero at boundary faces), so the
    operator is the 5-point Laplacian with natural no-flux walls; the
    constant nullspace is removed by pinning one cell.
    """
    nx, ny = g.nx, g.ny
    inv_h2 = 1.0 / (g.h * g.h)
    idx = lambda i, j: i * ny + j  # noqa: E731
    I, J = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    pinned = (I == 0) & (J == 0)
    I, J = I[~pinned], J[~pinned]
    R = idx(I, J)
    rows, cols, vals = [], [], []

    def add(r, c, v):
        rows.append(np.asarray(r).ravel())
        cols.append(np.asarray(c).ravel())
        vals.append(np.asarray(v).ravel())

    degree = (
        (I >= 1).astype(float)
        + (I <= nx - 2)
        + (J >= 1)
        + (J <= ny - 2)
    )
    add(R, R, degree * inv_h2)
    for di, dj, m in (
        (-1, 0, I >= 1),
        (1, 0, I <= nx - 2),
        (0, -1, J >= 1),
        (0, 1, J <= ny - 2),
    ):
        add(R[m], idx(I[m] + di, J[m] + dj), np.full(m.sum(), -inv_h2))
    add([idx(0, 0)], [idx(0, 0)], [1.0])
    n = nx * ny
    return sparse.assemble_arrays(
        np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), n, n
    )


def leray_project(prob: FlowProblem, r: Residual) -> Residual:
    """Fill r with the divergence-free part of its momentum vector.

    Solves Div G q = Div momentum (cell-centered Poisson) and subtracts the
    gradient part: proj_momentum = momentum - G q.  This is the l2-orthogonal
    projection onto discretely divergence-free fields; pairings against
    divergence-free fields are unchanged.  Idempotent.
    """
    if r.proj_momentum is not None:
        return r
    g = prob.grid
    m_field = unpack_interior(g, r.momentum)
    # the assembled operator is -Div G (positive definite), so negate Div m
    rhs = -divergence(g, m_field).ravel()
    rhs[0] = 0.0  # pinned cell; implied by the others (zero net flux)
    q = sparse.lu_solve(prob.projection_factors(), rhs).reshape(g.p_shape)
    gq = zero_velocity(g)
    gq.u[1:-1, :] = (q[1:, :] - q[:-1, :]) / g.h
    gq.v[:, 1:-1] = (q[:, 1:] - q[:, :-1]) / g.h
    r.proj_momentum = r.momentum - pack_interior(g, gq)
    r.l2_proj_norm = float(g.h * np.linalg.norm(r.proj_momentum))
    return r


def picard_solve(prob: FlowProblem, u_k: VelocityField) -> PicardStep:
    """One Oseen solve linearized at u_k; returns the Picard candidate."""
    g = prob.grid
    check_shapes(g, u_k)
    a_mat, rhs = _assemble_saddle(g, prob.nu, u_k, prob.bc)
    if prob.f is not None:
        n_vel = g.n_u_interior + g.n_v_interior
        rhs[:n_vel] += pack_interior(g, prob.f)
    factors = sparse.lu_factor(a_mat)
    x = sparse.lu_solve(factors, rhs)
    u_new, p_new = _split_solution(g, x)
    w = u_new - u_k
    w_h1 = float(np.sqrt(max(discrete_inner_product_h1(g, w, w), 0.0)))
    return PicardStep(u_new=u_new, p_new=p_new, w=w, w_h1=w_h1)


def nonlinear_residual(prob: FlowProblem, u: VelocityField) -> Residual:
    """Momentum defect nu*(-Lap u) + convect(u, u) - f at interior faces."""
    g = prob.grid
    check_shapes(g, u)
    lap = vector_laplacian(g, u, prob.bc)
    conv = convect(g, u, u, prob.bc)
    res = VelocityField(-prob.nu * lap.u + conv.u, -prob.nu * lap.v + conv.v)
    if prob.f is not None:
        res = res - prob.f
    momentum = pack_interior(g, res)
    l2 = float(g.h * np.linalg.norm(momentum))
    return Residual(grid=g, momentum=momentum, l2_norm=l2)


def riesz_representer(prob: FlowProblem, r: Residual) -> Residual:
    """Fill r with the divergence-free Riesz representer of its momentum.

    Solves [-Lap, G; Div, 0](chi, lam) = (momentum, 0) with homogeneous BCs;
    the dual norm is then |grad chi|.  Idempotent.
    """
    if r.representer is not None:
        return r
    g = prob.grid
    n_vel = g.n_u_interior + g.n_v_interior
    rhs = np.zeros(n_vel + g.nx * g.ny)
    rhs[:n_vel] = r.momentum
    x = sparse.lu_solve(prob.stokes_factors(), rhs)
    chi, lam = _split_solution(g, x)
    r.representer = chi
    r.multiplier = lam
    r.vprime_norm = float(
        np.sqrt(max(discrete_inner_product_h1(g, chi, chi), 0.0))
    )
    return r


def dual_pairing(g: MacGrid, momentum: np.ndarray, chi: VelocityField) -> float:
    """h^2-weighted pairing <momentum, chi> over interior faces."""
    return float(np.dot(momentum, pack_interior(g, chi))) * g.h * g.h


def lemma1_check(prob: FlowProblem, u_k: VelocityField, step: PicardStep, r_k: Residual):
    """Check nu*|grad w_{k+1}| <= |g(u_k)|_V' up to rounding slack.

    Returns (lhs, rhs, holds).  r_k must have its dual norm computed.
    """
    if r_k.vprime_norm is None:
        raise ValueError("lemma1_check requires the dual norm of r_k")
    lhs = prob.nu * step.w_h1
    rhs = r_k.vprime_norm
    holds = lhs <= rhs * (1.0 + LEMMA_SLACK) + LEMMA_SLACK * max(1.0, rhs)
    return lhs, rhs, holds


def max_divergence(g: MacGrid, w: VelocityField) -> float:
    return float(np.abs(divergence(g, w)).max())
