"""Discrete dynamic-programming regularization.

The discrete control problem with dynamics ``u_{k+1} = u_k + v_k`` and
control weight ``alpha * I`` is solved by a backward Riccati sweep

    Q_N     = F_N^T L_N F_N,                 b_N     = -F_N^T L_N y_N
    Q_{k-1} = alpha (Q_k + alpha I)^{-1} Q_k + F_{k-1}^T L_{k-1} F_{k-1}
    b_{k-1} = alpha (Q_k + alpha I)^{-1} b_k - F_{k-1}^T L_{k-1} y_{k-1}

followed by the forward feedback recursion

    u_{k+1} = (Q_{k+1} + alpha I)^{-1} (alpha u_k - b_{k+1}).

Unlike the explicit continuous scheme there is no step-size restriction.
Two independent checks live here as well: the residual of the discrete
Euler-Lagrange system and a dense block-tridiagonal solve of it.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .core import (SYM_TOL, Problem, RegConfig, RiccatiSolution,
                   Trajectory, operator_norm_max, validate_problem)
from .errors import (DimensionMismatch, LinearSolveFailure, ProblemTooLarge,
                     SymmetryViolation)

__all__ = [
    "DiscreteSolveReport",
    "riccati_backward",
    "trajectory_forward",
    "solve_discrete",
    "euler_lagrange_residual",
    "tikhonov_cost_discrete",
    "direct_tikhonov_oracle",
    "q_norm_bound",
    "ORACLE_MAX_UNKNOWNS",
]

COND_LIMIT = 1e14
ORACLE_MAX_UNKNOWNS = 20000


def _shifted_factor(Q, alpha):
    """Cholesky factor of ``Q + alpha I`` with a cheap conditioning guard."""
    # spectrum of Q + alpha I lies in [alpha, ||Q|| + alpha] for PSD Q
    cond_bound = (np.linalg.norm(Q) + alpha) / alpha
    if cond_bound > COND_LIMIT:
        raise LinearSolveFailure(
            f"Q + alpha I too ill-conditioned (bound {cond_bound:.3e} > {COND_LIMIT:.0e})")
    S = Q + alpha * np.eye(Q.shape[0])
    try:
        return sla.cho_factor(S, lower=True, check_finite=False), cond_bound
    except np.linalg.LinAlgError as exc:
        raise LinearSolveFailure(f"Q + alpha I not positive definite: {exc}") from exc


def q_norm_bound(problem: Problem) -> float:
    """Upper bound on every ``||Q_k||``: ``alpha + max_k ||F_k||^2 * ||L||``.

    For the identity weight this is exactly ``alpha + max_k ||F_k||^2``.
    """
    return problem.alpha + operator_norm_max(problem.ops) ** 2 * problem.residual_weight_norm()


def riccati_backward(problem: Problem) -> RiccatiSolution:
    """Backward sweep for ``Q_k`` and ``b_k``, ``k = N..0``.

    ``Q_0, b_0`` are produced by the same formula as the other nodes even
    though the forward recursion never reads them.
    """
    N, m, alpha = problem.N, problem.m, problem.alpha
    FtLF = problem.normal_matrices
    FtLy = problem.normal_rhs
    Q = np.empty((N + 1, m, m))
    b = np.empty((N + 1, m))
    Q[N] = FtLF[N]
    b[N] = -FtLy[N]
    for k in range(N, 0, -1):
        c, cond = _shifted_factor(Q[k], alpha)
        B = alpha * sla.cho_solve(c, Q[k], check_finite=False)
        scale = np.linalg.norm(B)
        if scale > 0:
            asym = np.linalg.norm(B - B.T) / scale
            if asym > max(SYM_TOL, 1e3 * np.finfo(float).eps * cond):
                raise SymmetryViolation(f"asymmetry {asym:.3e} at step k={k}")
        Qp = 0.5 * (B + B.T) + FtLF[k - 1]
        Q[k - 1] = 0.5 * (Qp + Qp.T)
        b[k - 1] = alpha * sla.cho_solve(c, b[k], check_finite=False) - FtLy[k - 1]
    return RiccatiSolution(Q, b)


def trajectory_forward(riccati: RiccatiSolution, cfg: RegConfig) -> Trajectory:
    """Forward feedback recursion starting from ``cfg.u0``."""
    Q, b, alpha = riccati.Q, riccati.b, cfg.alpha
    n, m = b.shape
    if cfg.u0.shape != (m,):
        raise DimensionMismatch("u0", (m,), cfg.u0.shape)
    u = np.empty((n, m))
    u[0] = cfg.u0
    for k in range(n - 1):
        c, _ = _shifted_factor(Q[k + 1], alpha)
        u[k + 1] = sla.cho_solve(c, alpha * u[k] - b[k + 1], check_finite=False)
    return Trajectory(u)


@dataclass(frozen=True, eq=False)
class DiscreteSolveReport:
    trajectory: Trajectory
    riccati: RiccatiSolution
    el_residual: float
    cost: float
    q_norm_max: float
    q_norm_bound: float
    q_norm_bound_ok: bool
    timings: dict = field(default_factory=dict)


def solve_discrete(problem: Problem) -> DiscreteSolveReport:
    """Backward Riccati sweep, forward trajectory, then diagnostics."""
    problem = validate_problem(problem)
    t0 = time.perf_counter()
    ric = riccati_backward(problem)
    t1 = time.perf_counter()
    traj = trajectory_forward(ric, problem.cfg)
    t2 = time.perf_counter()
    res = euler_lagrange_residual(problem, traj)
    cost = tikhonov_cost_discrete(problem, traj)
    qmax = float(np.max(ric.norms()))
    bound = q_norm_bound(problem)
    t3 = time.perf_counter()
    return DiscreteSolveReport(
        trajectory=traj,
        riccati=ric,
        el_residual=res,
        cost=cost,
        q_norm_max=qmax,
        q_norm_bound=bound,
        q_norm_bound_ok=bool(qmax <= bound * (1 + 1e-8)),
        timings={"riccati": t1 - t0, "trajectory": t2 - t1, "diagnostics": t3 - t2},
    )


def _values(problem, u):
    U = u.values if isinstance(u, Trajectory) else np.asarray(u, dtype=float)
    if U.ndim == 1:
        U = U[:, None]
    if U.shape != (problem.grid.n_nodes, problem.m):
        raise DimensionMismatch("trajectory", (problem.grid.n_nodes, problem.m), U.shape)
    return U


def euler_lagrange_vector(problem: Problem, u) -> np.ndarray:
    """Rows ``k = 1..N`` of the discrete Euler-Lagrange residual.

    The ghost node ``u_{N+1} = u_N`` closes the system at ``k = N``.
    """
    U = _values(problem, u)
    ext = np.vstack([U, U[-1:]])
    lap = ext[:-2] - 2 * ext[1:-1] + ext[2:]
    FtLF = problem.normal_matrices[1:]
    return np.einsum("kij,kj->ki", FtLF, U[1:]) - problem.alpha * lap - problem.normal_rhs[1:]


def euler_lagrange_residual(problem: Problem, u) -> float:
    """Root-sum-square norm of :func:`euler_lagrange_vector`."""
    return float(np.linalg.norm(euler_lagrange_vector(problem, u)))


def _weighted_misfit(problem, U):
    """``<F_k u_k - y_k, L_k (F_k u_k - y_k)>`` per node."""
    ops = problem.ops
    if ops.is_constant:
        R = U @ ops.unique[0].T - problem.data.samples
    else:
        R = np.einsum("kdm,km->kd", ops.ops, U) - problem.data.samples
    W = problem.cfg.weight_L
    if W.is_scalar:
        return W.scale * np.einsum("kd,kd->k", R, R)
    Ls = np.broadcast_to(W.matrices, (len(R),) + W.matrices.shape[-2:])
    return np.einsum("kd,kde,ke->k", R, Ls, R)


def tikhonov_cost_discrete(problem: Problem, u) -> float:
    """Discrete Tikhonov functional with its one-half prefactor.

    ``1/2 [ sum_{j<N} <r_j, L_j r_j> + alpha ||u_{j+1} - u_j||^2 ] + 1/2 <r_N, L_N r_N>``
    """
    U = _values(problem, u)
    misfit = _weighted_misfit(problem, U)
    velocity = np.sum(np.diff(U, axis=0) ** 2)
    return float(0.5 * (np.sum(misfit) + problem.alpha * velocity))


def direct_tikhonov_oracle(problem: Problem) -> Trajectory:
    """Solve the Euler-Lagrange system for ``u_1..u_N`` as one dense SPD system.

    Independent of the recursions: the block-tridiagonal matrix is assembled
    explicitly (last row carries the ``(-1, 1)`` Neumann-type stencil) and
    handed to a dense Cholesky solve.
    """
    problem = validate_problem(problem)
    N, m, alpha = problem.N, problem.m, problem.alpha
    n = N * m
    if n > ORACLE_MAX_UNKNOWNS:
        raise ProblemTooLarge(f"oracle system has {n} unknowns > {ORACLE_MAX_UNKNOWNS}")
    FtLF = problem.normal_matrices
    H = np.zeros((n, n))
    rhs = np.array(problem.normal_rhs[1:], dtype=float).reshape(n)
    I = np.eye(m)
    for j, k in enumerate(range(1, N + 1)):
        sl = slice(j * m, (j + 1) * m)
        H[sl, sl] = FtLF[k] + (alpha if k == N else 2 * alpha) * I
        if k < N:
            nx = slice((j + 1) * m, (j + 2) * m)
            H[sl, nx] = -alpha * I
            H[nx, sl] = -alpha * I
    rhs[:m] += alpha * problem.cfg.u0
    try:
        x = sla.solve(H, rhs, assume_a="pos")
    except (np.linalg.LinAlgError, sla.LinAlgError) as exc:
        raise LinearSolveFailure(f"oracle system solve failed: {exc}") from exc
    return Trajectory(np.vstack([problem.cfg.u0, x.reshape(N, m)]))
