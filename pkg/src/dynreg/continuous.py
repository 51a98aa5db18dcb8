"""Continuous dynamic-programming regularization, explicit Euler in time.

With the control weight normalized to the identity and the data weight
scaled to ``L / alpha`` the Riccati system reads

    Q' = Q Q - F^T (L/alpha) F,   b' = Q b + F^T (L/alpha) y,   u' = -Q u - b

with final values ``Q(T) = 0, b(T) = 0``. It is integrated backwards by
explicit Euler and then ``u`` forwards from ``u0``. The scheme is stable
only under the CFL condition ``dt^2 ||L|| max ||F||^2 / alpha <= 1/2``.

For a time-constant operator the residual-space formulation is also
available (:func:`eta_system_solve`): a ``d x d`` Riccati matrix and an
auxiliary state ``eta`` that avoid any derivative of the data.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .core import (Problem, RegConfig, RiccatiSolution, TimeGrid, Trajectory,
                   OperatorSequence, operator_norm_max, validate_problem)
from .discrete import _values, _weighted_misfit
from .errors import (CFLViolation, DimensionMismatch, NotConstantOperator,
                     SpectrumEscape)

__all__ = [
    "CFLResult",
    "ContinuousSolveReport",
    "cfl_check",
    "euler_riccati_backward",
    "euler_trajectory_forward",
    "solve_continuous",
    "eta_system_solve",
    "tikhonov_cost_continuous",
    "euler_lagrange_residual_continuous",
    "sample_problem",
]

SPECTRUM_TOL = 1e-10


class CFLResult(NamedTuple):
    passed: bool
    margin: float
    max_dt: float


def cfl_check(ops, grid: TimeGrid, alpha: float, weight_norm: float = 1.0) -> CFLResult:
    """Evaluate ``dt^2 * ||L|| * max_t ||F(t)||^2 / alpha <= 1/2``.

    ``margin`` is ``1/2`` minus the left-hand side and ``max_dt`` the largest
    admissible step (``inf`` when ``F == 0``).
    """
    f2 = operator_norm_max(ops) ** 2 * weight_norm
    lhs = grid.dt ** 2 * f2 / alpha
    max_dt = np.inf if f2 == 0 else float(np.sqrt(alpha / (2 * f2)))
    return CFLResult(bool(lhs <= 0.5), float(0.5 - lhs), max_dt)


def _cfl(problem):
    return cfl_check(problem.ops, problem.grid, problem.alpha, problem.residual_weight_norm())


def _require_cfl(problem):
    res = _cfl(problem)
    if not res.passed:
        raise CFLViolation(
            f"explicit Euler step dt={problem.grid.dt:.4g} violates the CFL condition "
            f"(largest admissible dt={res.max_dt:.4g}); refine the time grid or use "
            "the discrete method (solve_discrete), which has no step restriction",
            res.max_dt)
    return res


def _check_spectrum(Qk, dt, k):
    ev = np.linalg.eigvalsh(dt * Qk)
    if ev[0] < -SPECTRUM_TOL or ev[-1] > 1 + SPECTRUM_TOL:
        raise SpectrumEscape(
            f"spectrum of dt*Q_{k} is [{ev[0]:.3e}, {ev[-1]:.3e}], outside [0, 1]")


def euler_riccati_backward(problem: Problem, check_cfl: bool = True) -> RiccatiSolution:
    """Explicit Euler sweep for ``Q_k, b_k`` from ``Q_N = 0, b_N = 0``.

    With ``check_cfl=False`` the CFL gate and the spectrum guard are both
    skipped; this exists only to exhibit the instability.
    """
    if check_cfl:
        _require_cfl(problem)
    N, m, alpha, dt = problem.N, problem.m, problem.alpha, problem.grid.dt
    G = problem.normal_matrices
    h = problem.normal_rhs
    Q = np.zeros((N + 1, m, m))
    b = np.zeros((N + 1, m))
    for k in range(N, 0, -1):
        Qk = Q[k]
        Qp = Qk - dt * (Qk @ Qk - G[k] / alpha)
        Q[k - 1] = 0.5 * (Qp + Qp.T)
        b[k - 1] = b[k] - dt * (Qk @ b[k] + h[k] / alpha)
        if check_cfl:
            _check_spectrum(Q[k - 1], dt, k - 1)
    return RiccatiSolution(Q, b)


def euler_trajectory_forward(riccati: RiccatiSolution, cfg: RegConfig, grid: TimeGrid) -> Trajectory:
    Q, b = riccati.Q, riccati.b
    n, m = b.shape
    if n != grid.n_nodes:
        raise DimensionMismatch("riccati", f"{grid.n_nodes} time nodes", n)
    if cfg.u0.shape != (m,):
        raise DimensionMismatch("u0", (m,), cfg.u0.shape)
    dt = grid.dt
    u = np.empty((n, m))
    u[0] = cfg.u0
    for k in range(n - 1):
        u[k + 1] = u[k] + dt * (-Q[k] @ u[k] - b[k])
    return Trajectory(u)


@dataclass(frozen=True, eq=False)
class ContinuousSolveReport:
    trajectory: Trajectory
    riccati: RiccatiSolution
    cfl_margin: float
    spectrum_ok: bool
    cost: float
    self_convergence: float | None = None
    timings: dict = field(default_factory=dict)


def _spectrum_ok(ric, dt):
    ev = np.linalg.eigvalsh(0.5 * dt * (ric.Q + np.swapaxes(ric.Q, 1, 2)))
    return bool(ev.min() >= -SPECTRUM_TOL and ev.max() <= 1 + SPECTRUM_TOL)


def solve_continuous(problem: Problem,
                     refine: Callable[[TimeGrid], Problem] | None = None) -> ContinuousSolveReport:
    """Explicit-Euler solve with diagnostics.

    Parameters
    ----------
    problem : Problem
        Bundle sampled on its time grid.
    refine : callable, optional
        Maps a time grid to the same problem sampled on that grid. When given,
        the problem is re-solved with half the step and the max difference at
        the coarse nodes is stored as ``self_convergence``.

    Raises
    ------
    CFLViolation
        The grid is too coarse for the explicit scheme.
    """
    problem = validate_problem(problem)
    cfl = _require_cfl(problem)
    t0 = time.perf_counter()
    ric = euler_riccati_backward(problem)
    t1 = time.perf_counter()
    traj = euler_trajectory_forward(ric, problem.cfg, problem.grid)
    t2 = time.perf_counter()
    cost = tikhonov_cost_continuous(problem, traj)
    spec = _spectrum_ok(ric, problem.grid.dt)
    sc = None
    if refine is not None:
        fine = refine(problem.grid.refined(2))
        fine_traj = euler_trajectory_forward(
            euler_riccati_backward(fine), fine.cfg, fine.grid)
        sc = float(np.max(np.abs(fine_traj.values[::2] - traj.values)))
    t3 = time.perf_counter()
    return ContinuousSolveReport(
        trajectory=traj, riccati=ric, cfl_margin=cfl.margin, spectrum_ok=spec,
        cost=cost, self_convergence=sc,
        timings={"riccati": t1 - t0, "trajectory": t2 - t1, "diagnostics": t3 - t2})


def eta_system_solve(problem: Problem, check_cfl: bool = True) -> Trajectory:
    """Residual-space Riccati sweep plus the auxiliary ``eta`` state.

    Backward: ``P' = -L/alpha + P F F^T P`` and
    ``eta' = -F^T (L/alpha) y + F^T P F eta`` from ``P(T) = 0, eta(T) = 0``;
    forward: ``u' = -F^T P F u + eta``. Same Euler steps as the state-space
    path, so both agree to rounding.
    """
    problem = validate_problem(problem)
    if not problem.ops.all_equal():
        raise NotConstantOperator("eta system requires a time-constant operator")
    if check_cfl:
        _require_cfl(problem)
    N, d, alpha, dt = problem.N, problem.d, problem.alpha, problem.grid.dt
    F = problem.ops.unique[0]
    W = problem.cfg.weight_L
    y = problem.data.samples
    P = np.zeros((N + 1, d, d))
    eta = np.zeros((N + 1, problem.m))
    for k in range(N, 0, -1):
        Pk = P[k]
        Lk = W.matrix(k, d) / alpha
        PF = Pk @ F
        Pn = Pk - dt * (-Lk + PF @ PF.T)
        P[k - 1] = 0.5 * (Pn + Pn.T)
        eta[k - 1] = eta[k] - dt * (-F.T @ (Lk @ y[k]) + F.T @ (PF @ eta[k]))
    u = np.empty((N + 1, problem.m))
    u[0] = problem.cfg.u0
    for k in range(N):
        u[k + 1] = u[k] + dt * (-F.T @ (P[k] @ (F @ u[k])) + eta[k])
    return Trajectory(u)


def _velocity(U, dt):
    """Forward differences, backward difference at the last node."""
    V = np.empty_like(U)
    V[:-1] = np.diff(U, axis=0) / dt
    V[-1] = V[-2] if len(U) > 1 else 0.0
    return V


def tikhonov_cost_continuous(problem: Problem, u) -> float:
    """Trapezoidal quadrature of ``1/2 (<r, L r> + alpha |u'|^2)``."""
    U = _values(problem, u)
    dt = problem.grid.dt
    integrand = 0.5 * (_weighted_misfit(problem, U)
                       + problem.alpha * np.sum(_velocity(U, dt) ** 2, axis=1))
    w = np.full(len(U), dt)
    w[0] = w[-1] = dt / 2
    return float(w @ integrand)


def euler_lagrange_residual_continuous(problem: Problem, u) -> float:
    """Max-norm residual of ``F^T (L/alpha) F u - u'' = F^T (L/alpha) y``.

    Uses central second differences at interior nodes; vanishes at first
    order in ``dt`` for the explicit Euler solution of a smooth problem.
    """
    U = _values(problem, u)
    dt, alpha = problem.grid.dt, problem.alpha
    upp = (U[:-2] - 2 * U[1:-1] + U[2:]) / dt ** 2
    G = problem.normal_matrices[1:-1]
    r = np.einsum("kij,kj->ki", G, U[1:-1]) / alpha - upp - problem.normal_rhs[1:-1] / alpha
    return float(np.max(np.abs(r)))


def sample_problem(F: Callable[[float], np.ndarray], y: Callable[[float], np.ndarray],
                   grid: TimeGrid, cfg: RegConfig) -> Problem:
    """Sample time-continuous ``F(t)``, ``y(t)`` on ``grid`` and validate."""
    t = grid.nodes
    ops = OperatorSequence(np.array([np.atleast_2d(F(s)) for s in t]))
    data = np.array([np.atleast_1d(y(s)) for s in t])
    return validate_problem(ops, data, grid, cfg)
