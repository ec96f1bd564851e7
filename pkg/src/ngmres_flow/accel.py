"""NGMRES acceleration of the Picard iteration.

The optimization problem at step k+1 minimizes, over coefficients summing to
one, the norm of the combined nonlinear residual of the Picard candidate and
the last m+1 iterates.  All coefficient vectors are ordered newest-first:
(candidate, u_k, u_{k-1}, ..., u_{k-m}).
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import flow
from .grid import VelocityField, zero_velocity
from .flow import FlowProblem, Residual

KKT_COND_LIMIT = 1e12
TIKHONOV_SCALE = 1e-12


class NormChoice(Enum):
    VPRIME = "vprime"
    L2 = "l2"


@dataclass
class HistoryEntry:
    iterate: VelocityField
    residual: Residual


@dataclass
class HistoryWindow:
    """Iterates u_{k-m}..u_k (oldest first) plus the Picard candidate."""

    prob: FlowProblem
    entries: list
    candidate: HistoryEntry

    def ordered_residuals(self) -> list:
        """Residuals in coefficient order: candidate, then newest to oldest."""
        return [self.candidate.residual] + [e.residual for e in reversed(self.entries)]

    def ordered_iterates(self) -> list:
        return [self.candidate.iterate] + [e.iterate for e in reversed(self.entries)]

    def __len__(self):
        return len(self.entries) + 1


def gram_matrix(window: HistoryWindow, norm: NormChoice) -> np.ndarray:
    """Gram matrix of the windowed residuals in the chosen inner product."""
    residuals = window.ordered_residuals()
    n = len(residuals)
    if norm is NormChoice.VPRIME:
        for r in residuals:
            flow.riesz_representer(window.prob, r)
        g = np.empty((n, n))
        grid = window.prob.grid
        from .grid import discrete_inner_product_h1

        for i in range(n):
            for j in range(i, n):
                g[i, j] = g[j, i] = discrete_inner_product_h1(
                    grid, residuals[i].representer, residuals[j].representer
                )
    else:
        # The raw momentum vector carries a pressure-gradient component that
        # does not vanish at the fixed point; the optimization metric must
        # see only the divergence-free part or the combination degenerates
        # to the previous iterate once that component dominates.
        for r in residuals:
            flow.leray_project(window.prob, r)
        h2 = window.prob.grid.h ** 2
        m = np.stack([r.proj_momentum for r in residuals])
        g = h2 * (m @ m.T)
        g = 0.5 * (g + g.T)
    return g


@dataclass
class LsSolution:
    alpha: np.ndarray
    objective: float
    gram_cond_estimate: float
    dropped: int = 0
    fallback: bool = False


def _kkt_solve(g: np.ndarray):
    n = g.shape[0]
    kkt = np.zeros((n + 1, n + 1))
    kkt[:n, :n] = 2.0 * g
    kkt[:n, n] = 1.0
    kkt[n, :n] = 1.0
    rhs = np.zeros(n + 1)
    rhs[n] = 1.0
    cond = np.linalg.cond(kkt)
    if not np.isfinite(cond) or cond > KKT_COND_LIMIT:
        return None, cond
    sol = np.linalg.solve(kkt, rhs)
    return sol[:n], cond


def solve_constrained_ls(g: np.ndarray) -> LsSolution:
    """Minimize a^T G a subject to sum(a) = 1 via the KKT system.

    Near-singular windows are handled by dropping the oldest column (last
    index) and retrying down to size 2; if that still fails the pure Picard
    coefficients (1, 0, ..., 0) are returned.
    """
    g = np.asarray(g, dtype=np.float64)
    n = g.shape[0]
    if n == 1:
        return LsSolution(
            alpha=np.ones(1),
            objective=math.sqrt(max(g[0, 0], 0.0)),
            gram_cond_estimate=1.0,
        )
    # Scale the quadratic form to O(1): alpha is invariant under G -> G/s,
    # and without this the KKT conditioning is dominated by the residual
    # magnitude rather than by actual near-collinearity.
    scale = float(np.abs(np.diag(g)).max())
    if scale <= 0.0:
        alpha = np.zeros(n)
        alpha[0] = 1.0
        return LsSolution(alpha=alpha, objective=0.0, gram_cond_estimate=1.0)
    gs = g / scale
    dropped = 0
    cond = np.inf
    alpha_active = None
    size = n
    while size >= 2:
        alpha_active, cond = _kkt_solve(gs[:size, :size])
        if alpha_active is not None:
            break
        size -= 1
        dropped += 1
    fallback = alpha_active is None
    alpha = np.zeros(n)
    if fallback:
        alpha[0] = 1.0
        dropped = n - 2
    else:
        alpha[:size] = alpha_active
    obj_sq = float(alpha @ g @ alpha)
    # Numerical hygiene: the trivial feasible points bound the true minimum,
    # so an inexact KKT solve must never report anything worse.
    for idx in (0, 1):
        if obj_sq > g[idx, idx] * (1.0 + 1e-14):
            better = np.zeros(n)
            better[idx] = 1.0
            if g[idx, idx] < obj_sq:
                alpha, obj_sq, fallback = better, float(g[idx, idx]), True
    return LsSolution(
        alpha=alpha,
        objective=math.sqrt(max(obj_sq, 0.0)),
        gram_cond_estimate=float(cond) if np.isfinite(cond) else float("inf"),
        dropped=dropped,
        fallback=fallback,
    )


def solve_unconstrained_ls(window: HistoryWindow, norm: NormChoice) -> np.ndarray:
    """Free-coefficient form: minimize |g_cand + sum_i beta_i (g_cand - g_i)|.

    Solved by regularized normal equations over the difference vectors
    d_i = g(candidate) - g(u_{k-i}), i = 0..m_k.
    """
    g = gram_matrix(window, norm)
    m = g.shape[0] - 1
    if m == 0:
        return np.zeros(0)
    # d_i pairs: <d_i, d_j> and <g_cand, d_i> straight from the Gram matrix.
    n_mat = np.empty((m, m))
    rhs = np.empty(m)
    for i in range(m):
        rhs[i] = -(g[0, 0] - g[0, i + 1])
        for j in range(m):
            n_mat[i, j] = g[0, 0] - g[0, j + 1] - g[i + 1, 0] + g[i + 1, j + 1]
    n_mat += TIKHONOV_SCALE * max(np.trace(n_mat), 0.0) * np.eye(m)
    try:
        return np.linalg.solve(n_mat, rhs)
    except np.linalg.LinAlgError:
        return np.zeros(m)


def beta_to_alpha(beta: np.ndarray) -> np.ndarray:
    """Map free coefficients to constrained ones summing to one.

    u_{k+1} = q + sum_i beta_i (q - u_{k-i}) is the affine combination with
    alpha_cand = 1 + sum(beta) and alpha_{k-i} = -beta_i (u_k is i = 0).
    """
    beta = np.asarray(beta, dtype=np.float64)
    alpha = np.empty(beta.size + 1)
    alpha[0] = 1.0 + beta.sum()
    alpha[1:] = -beta
    return alpha


def ngmres_update(window: HistoryWindow, alpha) -> VelocityField:
    """Affine combination of the candidate and stored iterates."""
    alpha = np.asarray(alpha, dtype=np.float64)
    fields = window.ordered_iterates()
    if alpha.size != len(fields):
        raise ValueError(
            f"{alpha.size} coefficients for a window of {len(fields)} iterates"
        )
    if alpha[0] == 1.0 and not alpha[1:].any():
        return window.candidate.iterate.copy()
    out = zero_velocity(window.prob.grid)
    for a_i, w in zip(alpha, fields):
        out.u += a_i * w.u
        out.v += a_i * w.v
    return out


@dataclass
class DriverConfig:
    m: int | None = 0                  # None means unbounded window
    schedule: tuple | None = None      # (m_early, switch_tol, m_late)
    norm: NormChoice = NormChoice.VPRIME
    tol: float = 1e-8
    max_iters: int = 100
    mode: str = "ngmres"               # "picard" or "ngmres"


@dataclass
class IterationRecord:
    k: int
    g_vprime: float
    g_l2: float
    picard_resid_h1: float = float("nan")
    theta: float = float("nan")
    gamma: float = float("nan")
    kappa_hat: float = float("nan")
    alpha: list = field(default_factory=list)
    max_abs_alpha: float = float("nan")
    wall_time_ms: float = float("nan")
    lemma_lhs: float = float("nan")
    lemma_rhs: float = float("nan")
    lemma_holds: bool = True


@dataclass
class DriveResult:
    records: list
    status: str                        # converged | max_iters | diverged
    linear_solves: int = 0
    riesz_solves: int = 0


def _window_depth(cfg: DriverConfig, g_vprime: float):
    if cfg.schedule is not None:
        m_early, switch_tol, m_late = cfg.schedule
        return m_late if g_vprime < switch_tol else m_early
    return cfg.m


def drive(prob: FlowProblem, cfg: DriverConfig) -> DriveResult:
    """Run Picard or NGMRES-Picard until the dual-norm residual meets tol.

    Record k carries the residual norms at u_k together with the diagnostics
    of the step that produced u_{k+1} (theta/gamma/kappa refer to step k+1).
    The final record has residual norms only.
    """
    if cfg.mode not in ("picard", "ngmres"):
        raise ValueError(f"unknown mode {cfg.mode!r}")
    g = prob.grid
    u = zero_velocity(g)
    history: list[HistoryEntry] = []
    records: list[IterationRecord] = []
    result = DriveResult(records=records, status="max_iters")

    for k in range(cfg.max_iters + 1):
        r = flow.nonlinear_residual(prob, u)
        if not np.isfinite(r.l2_norm):
            records.append(IterationRecord(k=k, g_vprime=float("nan"), g_l2=r.l2_norm))
            result.status = "diverged"
            break
        flow.riesz_representer(prob, r)
        result.riesz_solves += 1
        if r.vprime_norm <= cfg.tol:
            records.append(IterationRecord(k=k, g_vprime=r.vprime_norm, g_l2=r.l2_norm))
            result.status = "converged"
            break
        if k == cfg.max_iters:
            records.append(IterationRecord(k=k, g_vprime=r.vprime_norm, g_l2=r.l2_norm))
            result.status = "max_iters"
            break

        t0 = time.perf_counter()
        step = flow.picard_solve(prob, u)
        result.linear_solves += 1
        r_tilde = flow.nonlinear_residual(prob, step.u_new)
        if not np.isfinite(r_tilde.l2_norm):
            records.append(IterationRecord(k=k, g_vprime=r.vprime_norm, g_l2=r.l2_norm))
            result.status = "diverged"
            break
        flow.riesz_representer(prob, r_tilde)
        result.riesz_solves += 1
        lemma_lhs, lemma_rhs, lemma_holds = flow.lemma1_check(prob, u, step, r)

        history.append(HistoryEntry(iterate=u, residual=r))
        depth = _window_depth(cfg, r.vprime_norm)
        kept = history if depth is None else history[len(history) - min(len(history), depth + 1):]
        window = HistoryWindow(
            prob=prob,
            entries=list(kept),
            candidate=HistoryEntry(iterate=step.u_new, residual=r_tilde),
        )

        if cfg.mode == "picard":
            alpha = np.zeros(len(window))
            alpha[0] = 1.0
            objective = r_tilde.vprime_norm
            theta = objective / r.vprime_norm
            gamma = 1.0
        else:
            gram = gram_matrix(window, cfg.norm)
            sol = solve_constrained_ls(gram)
            alpha = sol.alpha
            objective = sol.objective
            if cfg.norm is NormChoice.VPRIME:
                theta = objective / r.vprime_norm
                gamma = objective / r_tilde.vprime_norm
            else:
                flow.leray_project(prob, r)
                flow.leray_project(prob, r_tilde)
                theta = (
                    objective / r.l2_proj_norm if r.l2_proj_norm > 0 else float("nan")
                )
                gamma = (
                    objective / r_tilde.l2_proj_norm
                    if r_tilde.l2_proj_norm > 0
                    else float("nan")
                )
        u_next = ngmres_update(window, alpha)
        wall_ms = (time.perf_counter() - t0) * 1000.0

        records.append(
            IterationRecord(
                k=k,
                g_vprime=r.vprime_norm,
                g_l2=r.l2_norm,
                picard_resid_h1=step.w_h1,
                theta=theta,
                gamma=gamma,
                kappa_hat=r_tilde.vprime_norm / r.vprime_norm,
                alpha=[float(x) for x in alpha],
                max_abs_alpha=float(np.abs(alpha).max()),
                wall_time_ms=wall_ms,
                lemma_lhs=lemma_lhs,
                lemma_rhs=lemma_rhs,
                lemma_holds=lemma_holds,
            )
        )
        u = u_next
    return result
