"""Triangulations of the unit square."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import Delaunay

from ..errors import InvalidMeshSpec

__all__ = ["Mesh2D", "build_mesh", "boundary_arclength", "boundary_transfer"]


@dataclass(frozen=True, eq=False)
class Mesh2D:
    """Conforming P1 triangulation of ``[0, 1]^2``.

    ``boundary_vertices`` is ordered counter-clockwise and starts at the
    reference vertex ``reference_index`` (the boundary vertex nearest the
    origin), so ``boundary_vertices[1:]`` are the active boundary unknowns.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_vertices: np.ndarray
    interior_vertices: np.ndarray
    reference_index: int

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def active_boundary(self) -> np.ndarray:
        return self.boundary_vertices[1:]

    @property
    def n_active(self) -> int:
        return len(self.boundary_vertices) - 1

    def areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def min_spacing(self) -> float:
        p = self.vertices[self.triangles]
        edges = np.concatenate([p[:, 1] - p[:, 0], p[:, 2] - p[:, 1], p[:, 0] - p[:, 2]])
        return float(np.min(np.linalg.norm(edges, axis=1)))


def _orient(vertices, triangles):
    p = vertices[triangles]
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    area = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    tri = triangles.copy()
    flip = area < 0
    tri[flip] = tri[flip][:, [0, 2, 1]]
    return tri[np.abs(area) > 1e-14]


def _boundary_loop(vertices, triangles):
    """Ordered CCW boundary loop starting at the vertex nearest the origin."""
    edges = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    key = np.sort(edges, axis=1)
    _, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    # oriented edges of CCW triangles traverse the outer boundary CCW
    bnd = edges[counts[inv.ravel()] == 1]
    nxt = dict(zip(bnd[:, 0].tolist(), bnd[:, 1].tolist()))
    start = int(np.argmin(np.where(
        np.isin(np.arange(len(vertices)), bnd[:, 0]),
        np.linalg.norm(vertices, axis=1), np.inf)))
    loop = [start]
    while True:
        v = nxt[loop[-1]]
        if v == start:
            break
        loop.append(v)
        if len(loop) > len(bnd):
            raise InvalidMeshSpec("boundary is not a single closed loop")
    if len(loop) != len(bnd):
        raise InvalidMeshSpec("boundary is not a single closed loop")
    return np.array(loop)


def _finish(vertices, triangles):
    triangles = _orient(vertices, np.asarray(triangles, dtype=np.int64))
    loop = _boundary_loop(vertices, triangles)
    interior = np.setdiff1d(np.arange(len(vertices)), loop)
    for a in (vertices, triangles, loop, interior):
        a.setflags(write=False)
    return Mesh2D(vertices, triangles, loop, interior, int(loop[0]))


def build_mesh(subdivisions: int, structured: bool = True, seed: int = 0,
               jitter: float = 0.3) -> Mesh2D:
    """Triangulate the unit square with ``subdivisions`` intervals per side.

    Structured meshes split every grid cell into two triangles along the
    ``(0,0)-(1,1)`` diagonal. Unstructured meshes keep the same boundary
    nodes, jitter the interior grid points by up to ``jitter * h`` and
    Delaunay-triangulate; they are deterministic in ``seed``.
    """
    n = int(subdivisions)
    if n != subdivisions or n < 2:
        raise InvalidMeshSpec(f"subdivisions must be an integer >= 2, got {subdivisions}")
    h = 1.0 / n
    if structured:
        x = np.linspace(0.0, 1.0, n + 1)
        X, Y = np.meshgrid(x, x)
        vertices = np.column_stack([X.ravel(), Y.ravel()])
        idx = np.arange((n + 1) ** 2).reshape(n + 1, n + 1)
        v00 = idx[:-1, :-1].ravel()
        v10 = idx[:-1, 1:].ravel()
        v01 = idx[1:, :-1].ravel()
        v11 = idx[1:, 1:].ravel()
        triangles = np.concatenate([np.column_stack([v00, v10, v11]),
                                    np.column_stack([v00, v11, v01])])
        return _finish(vertices, triangles)

    if not 0 <= jitter < 0.5:
        raise InvalidMeshSpec("jitter must lie in [0, 0.5)")
    rng = np.random.default_rng(seed)
    s = np.arange(n) * h
    bnd = np.concatenate([
        np.column_stack([s, np.zeros(n)]),
        np.column_stack([np.ones(n), s]),
        np.column_stack([1 - s, np.ones(n)]),
        np.column_stack([np.zeros(n), 1 - s]),
    ])
    x = np.arange(1, n) * h
    X, Y = np.meshgrid(x, x)
    inner = np.column_stack([X.ravel(), Y.ravel()])
    inner = inner + rng.uniform(-jitter * h, jitter * h, inner.shape)
    vertices = np.vstack([bnd, inner])
    tri = Delaunay(vertices)
    return _finish(vertices, tri.simplices)


def boundary_arclength(points: np.ndarray) -> np.ndarray:
    """Counter-clockwise arclength from the origin along the unit square, in [0, 4)."""
    x, y = points[:, 0], points[:, 1]
    tol = 1e-12
    s = np.full(len(points), np.nan)
    bottom = np.abs(y) < tol
    right = (np.abs(x - 1) < tol) & ~bottom
    top = (np.abs(y - 1) < tol) & ~right
    left = (np.abs(x) < tol) & ~bottom & ~top
    s[bottom] = x[bottom]
    s[right] = 1 + y[right]
    s[top] = 3 - x[top]
    s[left] = 4 - y[left]
    if np.any(np.isnan(s)):
        raise InvalidMeshSpec("point not on the unit-square boundary")
    return np.mod(s, 4.0)


def boundary_transfer(src: Mesh2D, dst: Mesh2D) -> np.ndarray:
    """Piecewise-linear interpolation of boundary traces from ``src`` to ``dst``.

    Returns a matrix of shape ``(len(dst.boundary_vertices),
    len(src.boundary_vertices))`` in the meshes' boundary orderings.
    """
    s_src = boundary_arclength(src.vertices[src.boundary_vertices])
    s_dst = boundary_arclength(dst.vertices[dst.boundary_vertices])
    order = np.argsort(s_src)
    s_sorted = s_src[order]
    nb = len(s_sorted)
    s_ext = np.append(s_sorted, s_sorted[0] + 4.0)
    j = np.searchsorted(s_ext, s_dst, side="right") - 1
    j = np.clip(j, 0, nb - 1)
    w = (s_dst - s_ext[j]) / (s_ext[j + 1] - s_ext[j])
    P = np.zeros((len(s_dst), nb))
    rows = np.arange(len(s_dst))
    np.add.at(P, (rows, order[j]), 1 - w)
    np.add.at(P, (rows, order[(j + 1) % nb]), w)
    P[np.abs(P) < 1e-15] = 0.0
    return P
