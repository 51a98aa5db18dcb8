"""P1 finite elements and the discrete Neumann-to-Dirichlet map.

Unknowns are split into interior vertices and active boundary vertices
(the boundary minus the grounded reference vertex). With that splitting
the Neumann problem for current coefficients ``g`` reads

    [A11 A12] [u_i]   [  0  ]
    [A21 A22] [u_b] = [Mb g ]

and eliminating the interior gives ``G = (A22 - A21 A11^{-1} A12)^{-1} Mb``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..errors import DimensionMismatch, EllipticityViolation, SingularSchurComplement
from .mesh import Mesh2D

__all__ = [
    "ELLIPTICITY_FLOOR",
    "ConductivityField",
    "StiffnessBlocks",
    "EITDiscretization",
    "element_stiffness",
    "assemble_stiffness",
    "boundary_mass",
    "ntd_operator",
    "discretize",
    "full_system_trace",
    "hilbert_schmidt_inner",
    "hilbert_schmidt_basis_sum",
    "HSEmbedding",
]

ELLIPTICITY_FLOOR = 1e-6


@dataclass(frozen=True, eq=False)
class ConductivityField:
    """Nodal coefficients of the conductivity in the P1 basis."""

    nodal_values: np.ndarray

    def __post_init__(self):
        v = np.array(self.nodal_values, dtype=float)
        if v.ndim != 1:
            raise DimensionMismatch("conductivity", "1-d nodal array", v.shape)
        bad = ~(np.isfinite(v) & (v >= ELLIPTICITY_FLOOR))
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            raise EllipticityViolation(
                f"conductivity {v[i]} at vertex {i} is below the floor {ELLIPTICITY_FLOOR}")
        v.setflags(write=False)
        object.__setattr__(self, "nodal_values", v)

    @classmethod
    def constant(cls, mesh: Mesh2D, value: float = 1.0) -> "ConductivityField":
        return cls(np.full(mesh.n_vertices, float(value)))


def element_stiffness(mesh: Mesh2D) -> np.ndarray:
    """Unit-coefficient element matrices ``area * grad(phi_a) . grad(phi_b)``."""
    p = mesh.vertices[mesh.triangles]
    area = mesh.areas()
    # rotated opposite edges give area-scaled barycentric gradients
    e = np.stack([p[:, 2] - p[:, 1], p[:, 0] - p[:, 2], p[:, 1] - p[:, 0]], axis=1)
    grad = np.stack([-e[..., 1], e[..., 0]], axis=-1) / (2 * area[:, None, None])
    return area[:, None, None] * np.einsum("tak,tbk->tab", grad, grad)


def _stiffness_matrix(mesh, values, K0=None):
    """Global matrix for a nodal coefficient (no sign checks, linear in values)."""
    if K0 is None:
        K0 = element_stiffness(mesh)
    w = values[mesh.triangles].mean(axis=1)
    tri = mesh.triangles
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    n = mesh.n_vertices
    return sp.csr_matrix(((w[:, None, None] * K0).ravel(), (rows, cols)), shape=(n, n))


@dataclass(frozen=True, eq=False)
class StiffnessBlocks:
    full: sp.csr_matrix
    A11: sp.csc_matrix
    A12: sp.csr_matrix
    A21: sp.csr_matrix
    A22: sp.csr_matrix


def _split(mesh, K):
    I = mesh.interior_vertices
    B = mesh.active_boundary
    K = K.tocsr()
    return StiffnessBlocks(
        full=K,
        A11=K[I][:, I].tocsc(),
        A12=K[I][:, B],
        A21=K[B][:, I],
        A22=K[B][:, B],
    )


def assemble_stiffness(mesh: Mesh2D, gamma) -> StiffnessBlocks:
    """Assemble ``A_ij = int gamma grad(phi_i) . grad(phi_j)`` and split it.

    ``gamma`` is piecewise linear, so each element contributes its mean
    nodal value times the unit-coefficient element matrix (exact).
    """
    if not isinstance(gamma, ConductivityField):
        gamma = ConductivityField(np.broadcast_to(np.asarray(gamma, dtype=float),
                                                  (mesh.n_vertices,)))
    if gamma.nodal_values.shape != (mesh.n_vertices,):
        raise DimensionMismatch("conductivity", (mesh.n_vertices,), gamma.nodal_values.shape)
    return _split(mesh, _stiffness_matrix(mesh, gamma.nodal_values))


def boundary_mass(mesh: Mesh2D, remove_reference: bool = True) -> np.ndarray:
    """Gram matrix of the boundary hat functions, in boundary ordering.

    Each boundary edge of length ``h`` contributes ``h/6 * [[2, 1], [1, 2]]``.
    With ``remove_reference`` the row and column of the reference vertex are
    deleted.
    """
    loop = mesh.boundary_vertices
    nb = len(loop)
    p = mesh.vertices[loop]
    h = np.linalg.norm(np.roll(p, -1, axis=0) - p, axis=1)
    i = np.arange(nb)
    j = (i + 1) % nb
    M = np.zeros((nb, nb))
    np.add.at(M, (i, i), h / 3)
    np.add.at(M, (j, j), h / 3)
    np.add.at(M, (i, j), h / 6)
    np.add.at(M, (j, i), h / 6)
    if remove_reference:
        return M[1:, 1:]
    return M


@dataclass(frozen=True, eq=False)
class EITDiscretization:
    """Everything needed to evaluate and differentiate ``G`` for one mesh/coefficient.

    ``extension`` is the discrete harmonic extension ``E`` of shape
    ``(n_vertices, n_b)``: active boundary values to all vertex values, with
    zero at the reference vertex.
    """

    mesh: Mesh2D
    blocks: StiffnessBlocks
    Mb: np.ndarray
    T: np.ndarray
    T_factor: tuple
    G: np.ndarray
    extension: np.ndarray

    @property
    def n_b(self) -> int:
        return self.Mb.shape[0]

    def schur_condition(self) -> float:
        return float(np.linalg.cond(self.T))


def _schur(blocks):
    lu = spla.splu(blocks.A11)
    X = lu.solve(blocks.A12.toarray())
    T = blocks.A22.toarray() - blocks.A21 @ X
    T = 0.5 * (T + T.T)
    return T, X


def _factor_schur(T):
    try:
        return sla.cho_factor(T, lower=True)
    except np.linalg.LinAlgError as exc:
        raise SingularSchurComplement(f"Schur complement not positive definite: {exc}") from exc


def ntd_operator(blocks: StiffnessBlocks, Mb: np.ndarray) -> np.ndarray:
    """``G = (A22 - A21 A11^{-1} A12)^{-1} Mb`` on the active boundary space."""
    if Mb.shape != blocks.A22.shape:
        raise DimensionMismatch("boundary mass", blocks.A22.shape, Mb.shape)
    if blocks.A11.shape[0] == 0:
        T = blocks.A22.toarray()
    else:
        T, _ = _schur(blocks)
    return sla.cho_solve(_factor_schur(T), Mb)


def discretize(mesh: Mesh2D, gamma=1.0) -> EITDiscretization:
    blocks = assemble_stiffness(mesh, gamma)
    Mb = boundary_mass(mesh)
    T, X = _schur(blocks)
    c = _factor_schur(T)
    G = sla.cho_solve(c, Mb)
    E = np.zeros((mesh.n_vertices, len(Mb)))
    E[mesh.interior_vertices] = -X
    E[mesh.active_boundary, np.arange(len(Mb))] = 1.0
    for a in (Mb, T, G, E):
        a.setflags(write=False)
    return EITDiscretization(mesh, blocks, Mb, T, c, G, E)


def full_system_trace(mesh: Mesh2D, gamma, g: np.ndarray) -> np.ndarray:
    """Boundary voltages for current coefficients ``g`` by one sparse solve
    of the full (grounded) system, without forming the Schur complement."""
    K = assemble_stiffness(mesh, gamma).full
    keep = np.setdiff1d(np.arange(mesh.n_vertices), [mesh.reference_index])
    Kr = K[keep][:, keep].tocsc()
    f = np.zeros(mesh.n_vertices)
    f[mesh.active_boundary] = boundary_mass(mesh) @ g
    u = np.zeros(mesh.n_vertices)
    u[keep] = spla.spsolve(Kr, f[keep])
    return u[mesh.active_boundary]


def hilbert_schmidt_inner(G1: np.ndarray, G2: np.ndarray) -> float:
    """Hilbert-Schmidt inner product of two discrete NtD operators, ``tr(G1 G2)``."""
    G1 = np.asarray(G1)
    G2 = np.asarray(G2)
    if G1.shape != G2.shape or G1.ndim != 2 or G1.shape[0] != G1.shape[1]:
        raise DimensionMismatch("hilbert_schmidt_inner", G1.shape, G2.shape)
    return float(np.einsum("ij,ji->", G1, G2))


def hilbert_schmidt_basis_sum(G1: np.ndarray, G2: np.ndarray, Mb: np.ndarray) -> float:
    """``sum_i (L1 e_i, L2 e_i)`` for an Mb-orthonormal basis built by Gram-Schmidt.

    Direct evaluation of the definition; kept independent of the trace
    identity so it can serve as its check.
    """
    n = Mb.shape[0]
    basis = []
    for i in range(n):
        v = np.zeros(n)
        v[i] = 1.0
        for _ in range(2):  # re-orthogonalize once
            for e in basis:
                v = v - (e @ Mb @ v) * e
        v = v / np.sqrt(v @ Mb @ v)
        basis.append(v)
    total = 0.0
    for e in basis:
        total += (G1 @ e) @ Mb @ (G2 @ e)
    return float(total)


class HSEmbedding:
    """Coordinates in which the Euclidean inner product is Hilbert-Schmidt.

    With ``Mb = B B^T`` the map ``G -> B^T G B^{-T}`` is an isometry from
    boundary-operator matrices (HS inner product ``tr(G1^T Mb G2 Mb^{-1})``)
    to Frobenius space. For ``G = S Mb`` with ``S`` symmetric that inner
    product equals ``tr(G1 G2)``.
    """

    def __init__(self, Mb: np.ndarray):
        self.Mb = np.asarray(Mb)
        self.n = self.Mb.shape[0]
        self.B = np.linalg.cholesky(self.Mb)
        self._Binv = sla.solve_triangular(self.B, np.eye(self.n), lower=True)

    def embed(self, G: np.ndarray) -> np.ndarray:
        """Flattened coordinates of one ``(n, n)`` matrix or a stack of them."""
        G = np.asarray(G)
        Y = self.B.T @ G @ self._Binv.T
        return Y.reshape(G.shape[:-2] + (self.n * self.n,))

    def unembed(self, z: np.ndarray) -> np.ndarray:
        Y = np.asarray(z).reshape(self.n, self.n)
        return self._Binv.T @ Y @ self.B.T

    def inner(self, G1, G2) -> float:
        return float(self.embed(G1) @ self.embed(G2))

    def norm(self, G) -> float:
        return float(np.linalg.norm(self.embed(G)))
