"""Scalar quality measures for reconstructions."""

from __future__ import annotations

import numpy as np

from ..core import TimeGrid, Trajectory
from ..errors import DegenerateFrame, DimensionMismatch

__all__ = ["positive_centroid", "center_of_mass_error", "trajectory_at", "relative_error"]


def positive_centroid(frame: np.ndarray, vertices: np.ndarray) -> np.ndarray:
    """``sum_v x_v max(g_v, 0) / sum_v max(g_v, 0)``."""
    g = np.asarray(frame, dtype=float)
    x = np.asarray(vertices, dtype=float)
    if g.shape != x.shape[:1]:
        raise DimensionMismatch("frame", x.shape[:1], g.shape)
    w = np.maximum(g, 0.0)
    total = w.sum()
    if not (np.all(np.isfinite(g)) and total > 0):
        raise DegenerateFrame("frame has no positive nodal value")
    return (w @ x) / total


def center_of_mass_error(frame: np.ndarray, vertices: np.ndarray, truth) -> float:
    """Distance between the positive-part centroid of ``frame`` and ``truth``.

    Raises
    ------
    DegenerateFrame
        No nodal value is positive (or the frame is not finite).
    """
    c = positive_centroid(frame, vertices)
    return float(np.linalg.norm(c - np.asarray(truth, dtype=float)))


def trajectory_at(traj, grid: TimeGrid, t: float) -> np.ndarray:
    """Piecewise-linear interpolation of node values at time ``t``."""
    U = traj.values if isinstance(traj, Trajectory) else np.asarray(traj)
    if len(U) != grid.n_nodes:
        raise DimensionMismatch("trajectory", grid.n_nodes, len(U))
    s = (t - grid.t_start) / grid.dt
    if not -1e-12 <= s <= grid.n_steps + 1e-12:
        raise ValueError(f"time {t} outside [{grid.t_start}, {grid.t_end}]")
    k = int(np.clip(np.floor(s), 0, grid.n_steps - 1))
    w = np.clip(s - k, 0.0, 1.0)
    if w < 1e-12:
        return np.array(U[k])
    if w > 1 - 1e-12:
        return np.array(U[k + 1])
    return (1 - w) * U[k] + w * U[k + 1]


def relative_error(U, truth) -> float:
    """``||U - truth||_F / ||truth||_F`` (absolute error if the truth is zero)."""
    U = U.values if isinstance(U, Trajectory) else np.asarray(U)
    truth = np.asarray(truth)
    err = np.linalg.norm(U - truth)
    ref = np.linalg.norm(truth)
    return float(err / ref) if ref > 0 else float(err)
