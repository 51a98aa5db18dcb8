"""Plain-text output formats: PGM frames, mesh dumps, CSV rows and problem bundles."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..core import (DataSequence, OperatorSequence, Problem, RegConfig, TimeGrid, Weight,
                    validate_problem)
from ..errors import ConfigError, DimensionMismatch
from ..eit.mesh import Mesh2D

__all__ = [
    "scale_frame",
    "grid_image",
    "write_pgm",
    "read_pgm",
    "write_mesh",
    "format_number",
    "save_problem",
    "load_problem",
    "BUNDLE_FORMAT",
]

BUNDLE_FORMAT = "dynreg-problem/1"


def scale_frame(values: np.ndarray):
    """Map values linearly onto ``0..255`` and return ``(pixels, lo, hi)``.

    Uses ``floor`` and reserves 255 for entries equal to the maximum, so the
    position of the first maximum survives quantization. A constant frame
    maps to all zeros.
    """
    v = np.asarray(values, dtype=float)
    lo, hi = float(np.min(v)), float(np.max(v))
    if hi == lo:
        return np.zeros(v.shape, dtype=np.int64), lo, hi
    px = np.floor(255.0 * (v - lo) / (hi - lo)).astype(np.int64)
    px = np.where(v == hi, 255, np.minimum(px, 254))
    return px, lo, hi


def grid_image(values: np.ndarray, mesh: Mesh2D | None = None) -> np.ndarray:
    """Arrange nodal values as an image.

    With a mesh whose vertices lie on a uniform grid the image has one pixel
    per vertex, top row at ``y = 1``. Without a mesh the values form a single
    row.
    """
    v = np.asarray(values)
    if mesh is None:
        return v.reshape(1, -1)
    if v.shape != (mesh.n_vertices,):
        raise DimensionMismatch("frame", (mesh.n_vertices,), v.shape)
    n = int(round(np.sqrt(mesh.n_vertices))) - 1
    ij = np.rint(mesh.vertices * n).astype(int)
    if (n + 1) ** 2 != mesh.n_vertices or not np.allclose(ij / n, mesh.vertices, atol=1e-9):
        raise DimensionMismatch("frame", "structured grid mesh", "unstructured mesh")
    img = np.zeros((n + 1, n + 1), dtype=v.dtype)
    img[n - ij[:, 1], ij[:, 0]] = v
    return img


def write_pgm(path, pixels: np.ndarray, comment: str | None = None) -> None:
    """Plain (P2) PGM with maxval 255."""
    px = np.asarray(pixels)
    if px.ndim != 2:
        raise DimensionMismatch("pixels", "2-d array", px.shape)
    if px.min() < 0 or px.max() > 255:
        raise ValueError("pixel values must lie in 0..255")
    h, w = px.shape
    lines = ["P2"]
    if comment:
        lines.extend(f"# {c}" for c in comment.splitlines())
    lines.append(f"{w} {h}")
    lines.append("255")
    lines.extend(" ".join(str(int(x)) for x in row) for row in px)
    Path(path).write_text("\n".join(lines) + "\n")


def read_pgm(path) -> np.ndarray:
    tokens = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0]
        tokens.extend(line.split())
    if not tokens or tokens[0] != "P2":
        raise ValueError(f"{path}: not a plain PGM file")
    w, h, _ = (int(t) for t in tokens[1:4])
    return np.array([int(t) for t in tokens[4:4 + w * h]]).reshape(h, w)


def write_mesh(path, mesh: Mesh2D) -> None:
    """Vertex and triangle lists, then the boundary loop (first entry is the reference)."""
    out = [f"vertices {mesh.n_vertices}"]
    out.extend(f"{format_number(x)} {format_number(y)}" for x, y in mesh.vertices)
    out.append(f"triangles {mesh.n_triangles}")
    out.extend(" ".join(map(str, t)) for t in mesh.triangles)
    out.append(f"boundary {len(mesh.boundary_vertices)}")
    out.append(" ".join(map(str, mesh.boundary_vertices)))
    Path(path).write_text("\n".join(out) + "\n")


def format_number(x) -> str:
    """Round-trip float text (shortest repr); empty string for missing values."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def save_problem(path, problem: Problem) -> None:
    """Write a problem bundle as JSON text (floats in shortest round-trip form).

    Top-level keys: ``format``, ``t_start``, ``t_end``, ``n_steps``,
    ``alpha``, ``u0``, ``weight`` (``{"kind", "scale", "matrices"}``),
    ``operators`` (list of ``d x m`` nested lists, or a single one with
    ``"constant_operator": true``), ``data`` and ``noise_level``.
    """
    ops = problem.ops
    w = problem.cfg.weight_L
    doc = {
        "format": BUNDLE_FORMAT,
        "t_start": problem.grid.t_start,
        "t_end": problem.grid.t_end,
        "n_steps": problem.grid.n_steps,
        "alpha": problem.alpha,
        "u0": problem.cfg.u0.tolist(),
        "weight": {"kind": w.kind, "scale": w.scale,
                   "matrices": None if w.matrices is None else np.asarray(w.matrices).tolist()},
        "constant_operator": bool(ops.is_constant),
        "operators": (ops.unique[0] if ops.is_constant else ops.ops).tolist(),
        "data": problem.data.samples.tolist(),
        "noise_level": problem.data.noise_level,
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_problem(path) -> Problem:
    """Read a bundle written by :func:`save_problem` and validate it."""
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise ConfigError("bundle.path", f"cannot read bundle {path}: {exc}") from exc
    if doc.get("format") != BUNDLE_FORMAT:
        raise ConfigError("bundle.path", f"unsupported bundle format {doc.get('format')!r}")
    try:
        grid = TimeGrid(doc["t_end"], doc["n_steps"], doc.get("t_start", 0.0))
        wd = doc.get("weight") or {"kind": "identity"}
        if wd["kind"] == "identity":
            weight = Weight.identity()
        elif wd["kind"] == "scaled":
            weight = Weight.scaled(wd["scale"])
        else:
            weight = Weight.explicit(np.array(wd["matrices"], dtype=float))
        F = np.array(doc["operators"], dtype=float)
        if doc.get("constant_operator"):
            F = OperatorSequence.constant(F, grid.n_nodes)
        data = DataSequence(np.array(doc["data"], dtype=float), doc.get("noise_level") or 0.0)
        cfg = RegConfig(doc["alpha"], np.array(doc["u0"], dtype=float), weight)
    except KeyError as exc:
        raise ConfigError("bundle.path", f"bundle is missing key {exc}") from exc
    return validate_problem(F, data, grid, cfg)
