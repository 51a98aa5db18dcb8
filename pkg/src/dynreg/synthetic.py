"""Random and structured synthetic dynamic inverse problems."""

from __future__ import annotations

import numpy as np

from .core import DataSequence, OperatorSequence, Problem, RegConfig, TimeGrid, validate_problem

__all__ = ["SmoothBenchmark", "random_problem", "smooth_problem", "zero_operator_problem", "unit_noise"]


def random_problem(rng: np.random.Generator, m: int, d: int, n_steps: int, alpha: float,
                   t_end: float = 1.0, u0_scale: float = 1.0) -> Problem:
    """Independent Gaussian ``F_k`` (scaled by ``1/sqrt(d)``), ``y_k`` and ``u0``."""
    n = n_steps + 1
    F = rng.standard_normal((n, d, m)) / np.sqrt(d)
    y = rng.standard_normal((n, d))
    u0 = u0_scale * rng.standard_normal(m)
    return validate_problem(F, y, TimeGrid(t_end, n_steps), RegConfig(alpha, u0))


def unit_noise(rng: np.random.Generator, shape) -> np.ndarray:
    """Gaussian perturbation with every row rescaled to unit Euclidean norm."""
    e = rng.standard_normal(shape)
    return e / np.linalg.norm(e, axis=-1, keepdims=True)


class SmoothBenchmark:
    """Smoothly time-varying operator with a known smooth exact trajectory.

    ``F(t) = F_a + drift * sin(2 pi t / T) F_b`` and
    ``u(t) = c_1 cos(2 pi t / T) + c_2 sin(2 pi t / T)``; data are
    ``F(t) u(t)`` plus ``noise`` times a per-sample unit perturbation.
    Coefficients are drawn once, so the same benchmark can be sampled on
    several grids.
    """

    def __init__(self, rng: np.random.Generator, m: int, d: int, t_end: float = 1.0,
                 drift: float = 0.3):
        self.m, self.d, self.t_end, self.drift = m, d, float(t_end), drift
        self.Fa = rng.standard_normal((d, m)) / np.sqrt(d)
        self.Fb = rng.standard_normal((d, m)) / np.sqrt(d)
        self.c1, self.c2 = rng.standard_normal((2, m))

    def _phase(self, t):
        return 2 * np.pi * np.asarray(t, dtype=float) / self.t_end

    def operator(self, t) -> np.ndarray:
        w = self._phase(t)
        return self.Fa + self.drift * np.sin(w)[..., None, None] * self.Fb

    def truth(self, t) -> np.ndarray:
        w = self._phase(t)
        return np.cos(w)[..., None] * self.c1 + np.sin(w)[..., None] * self.c2

    def sample(self, grid: TimeGrid, alpha: float, noise: float = 0.0,
               rng: np.random.Generator | None = None, u0: str = "truth") -> Problem:
        t = grid.nodes
        F = self.operator(t)
        y = np.einsum("kdm,km->kd", F, self.truth(t))
        if noise:
            if rng is None:
                raise ValueError("noisy sampling needs a generator")
            y = y + noise * unit_noise(rng, y.shape)
        start = self.truth(t[0]) if u0 == "truth" else np.zeros(self.m)
        return validate_problem(F, DataSequence(y, noise), grid, RegConfig(alpha, start))


def smooth_problem(rng: np.random.Generator, m: int, d: int, n_steps: int, alpha: float,
                   t_end: float = 1.0, noise: float = 0.0, drift: float = 0.3,
                   u0: str = "truth"):
    """Sample a fresh :class:`SmoothBenchmark`; returns ``(problem, truth)``
    with ``truth`` of shape ``(N+1, m)``."""
    bench = SmoothBenchmark(rng, m, d, t_end, drift)
    grid = TimeGrid(t_end, n_steps)
    return bench.sample(grid, alpha, noise, rng, u0), bench.truth(grid.nodes)


def zero_operator_problem(rng: np.random.Generator, m: int, d: int, n_steps: int,
                          alpha: float, t_end: float = 1.0) -> Problem:
    """``F == 0`` with arbitrary data; the regularized solution stays at ``u0``."""
    grid = TimeGrid(t_end, n_steps)
    ops = OperatorSequence.constant(np.zeros((d, m)), grid.n_nodes)
    y = rng.standard_normal((grid.n_nodes, d))
    return validate_problem(ops, y, grid, RegConfig(alpha, rng.standard_normal(m)))
