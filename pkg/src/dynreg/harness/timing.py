"""Wall-clock scaling of the solvers in the number of time steps."""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from ..continuous import euler_riccati_backward, euler_trajectory_forward
from ..discrete import riccati_backward, trajectory_forward
from ..errors import ConfigError
from .config import ExperimentConfig
from .runner import build_bundle

__all__ = ["ScalingTable", "timing_scaling_suite", "loglog_slope"]


def loglog_slope(n, seconds) -> float:
    """Least-squares slope of ``log(seconds)`` against ``log(n)``."""
    return float(np.polyfit(np.log(np.asarray(n, float)), np.log(np.asarray(seconds, float)), 1)[0])


@dataclass(frozen=True)
class ScalingTable:
    method: str
    m: int
    n_steps: tuple
    seconds: tuple
    slope: float

    @property
    def ratios(self) -> tuple:
        """Consecutive time ratios ``t[i+1] / t[i]``."""
        s = self.seconds
        return tuple(s[i + 1] / s[i] for i in range(len(s) - 1))

    def csv_text(self) -> str:
        lines = ["# dynreg-timing/1", "n_steps,seconds"]
        lines += [f"{n},{t!r}" for n, t in zip(self.n_steps, self.seconds)]
        lines.append(f"# slope={self.slope!r}")
        return "\n".join(lines) + "\n"


def _check_steps(n_steps):
    n = [int(v) for v in n_steps]
    if len(n) < 3:
        raise ConfigError("timing.n_steps", f"needs at least 3 values, got {len(n)}")
    if any(v < 1 for v in n):
        raise ConfigError("timing.n_steps", "values must be positive")
    if any(b < 2 * a for a, b in zip(n, n[1:])):
        raise ConfigError("timing.n_steps", f"consecutive values must grow by >= 2x, got {n}")
    return tuple(n)


def timing_scaling_suite(base: ExperimentConfig, n_steps=None, repeats: int | None = None,
                         method: str | None = None) -> ScalingTable:
    """Time the backward sweep plus forward recursion for each ``n_steps``.

    The synthetic bundle of ``base`` is rebuilt for every grid with the
    same seed, at the first ``alpha``. Each entry is the minimum over
    ``repeats`` runs (interleaved across sizes), which filters scheduler
    noise. ``method`` defaults to the config's method (``discrete`` for
    ``both``).
    """
    if base.problem != "synthetic":
        raise ConfigError("problem.kind", "timing needs a synthetic problem")
    n_steps = _check_steps(base.timing_n_steps if n_steps is None else n_steps)
    repeats = base.timing_repeats if repeats is None else int(repeats)
    if repeats < 1:
        raise ConfigError("timing.repeats", "must be >= 1")
    method = method or ("discrete" if base.method == "both" else base.method)
    if method not in ("discrete", "continuous"):
        raise ConfigError("solver.method", f"cannot time {method!r}")
    base = replace(base, alpha=base.alpha[:1])

    problems = [build_bundle(base, n_steps=n).problem for n in n_steps]
    for p in problems:
        p.normal_matrices, p.normal_rhs  # setup cost is not part of the sweep
    best = [np.inf] * len(problems)
    # round-robin over sizes so transient load affects every size alike
    for _ in range(repeats):
        for i, p in enumerate(problems):
            t0 = time.perf_counter()
            if method == "discrete":
                trajectory_forward(riccati_backward(p), p.cfg)
            else:
                euler_trajectory_forward(euler_riccati_backward(p), p.cfg, p.grid)
            best[i] = min(best[i], time.perf_counter() - t0)
    seconds = best
    return ScalingTable(method, base.synthetic.m, n_steps, tuple(seconds),
                        loglog_slope(n_steps, seconds))
