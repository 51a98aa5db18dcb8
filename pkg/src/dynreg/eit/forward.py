"""Linearized forward operator and synthetic data for the moving-inclusion
dynamic EIT experiment."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from ..core import DataSequence, OperatorSequence, RegConfig, TimeGrid, validate_problem
from ..errors import InvalidScenario
from .fem import (ConductivityField, EITDiscretization, HSEmbedding, _stiffness_matrix,
                  discretize, element_stiffness)
from .mesh import Mesh2D, boundary_transfer, build_mesh

__all__ = [
    "EITScenario",
    "LinearizedForward",
    "linearized_forward",
    "nodal_inclusion",
    "simulate_data",
    "EITExperiment",
    "build_eit_experiment",
]


@dataclass(frozen=True)
class EITScenario:
    """Moving circular inclusion on the unit square.

    The inclusion center follows
    ``(cx - r cos(2 pi t), cy - r sin(2 pi t))`` with ``(cx, cy) = path_center``
    and ``r = path_radius``; defaults reproduce the reference experiment.
    """

    grid_subdivisions: int = 25
    time_samples: int = 51
    inclusion_radius: float = 0.08
    inclusion_contrast: float = 2.0
    path_center: tuple = (0.4, 0.5)
    path_radius: float = 0.2
    noise_fraction: float = 0.0
    t_end: float = 1.0

    def __post_init__(self):
        if int(self.grid_subdivisions) != self.grid_subdivisions or self.grid_subdivisions < 2:
            raise InvalidScenario("grid_subdivisions must be an integer >= 2")
        if self.time_samples < 2:
            raise InvalidScenario("time_samples must be >= 2")
        if not self.inclusion_radius > 0:
            raise InvalidScenario("inclusion_radius must be positive")
        if not 0 <= self.noise_fraction < 1:
            raise InvalidScenario("noise_fraction must lie in [0, 1)")
        if 1 + self.inclusion_contrast <= 0:
            raise InvalidScenario("inclusion contrast makes the conductivity non-positive")

    @property
    def time_grid(self) -> TimeGrid:
        return TimeGrid(self.t_end, self.time_samples - 1)

    def center(self, t: float) -> np.ndarray:
        cx, cy = self.path_center
        w = 2 * np.pi * t
        return np.array([cx - self.path_radius * np.cos(w), cy - self.path_radius * np.sin(w)])


def nodal_inclusion(mesh: Mesh2D, center, radius: float, contrast: float) -> ConductivityField:
    """``1 + contrast`` at vertices within ``radius`` of ``center``, 1 elsewhere."""
    if not radius > 0:
        raise InvalidScenario("radius must be positive")
    dist = np.linalg.norm(mesh.vertices - np.asarray(center, dtype=float), axis=1)
    return ConductivityField(np.where(dist <= radius, 1.0 + contrast, 1.0))


class LinearizedForward:
    """Derivative of ``gamma -> G(gamma)`` at a base discretization.

    For a nodal direction ``dg`` the Schur complement changes by
    ``dT = E^T dA E`` (``E`` the harmonic extension), which expands to
    ``dA22 - dA21 X - X^T dA12 + X^T dA11 X`` with ``X = A11^{-1} A12``,
    and ``dG = -T^{-1} dT T^{-1} Mb``.
    """

    def __init__(self, disc: EITDiscretization):
        self.disc = disc
        self.mesh = disc.mesh
        self._K0 = element_stiffness(self.mesh)
        self._Tinv = sla.cho_solve(disc.T_factor, np.eye(disc.n_b))

    @property
    def n_b(self) -> int:
        return self.disc.n_b

    def schur_derivative(self, dgamma: np.ndarray) -> np.ndarray:
        dA = _stiffness_matrix(self.mesh, np.asarray(dgamma, dtype=float), self._K0)
        E = self.disc.extension
        return E.T @ (dA @ E)

    def apply(self, dgamma: np.ndarray) -> np.ndarray:
        """``dG`` for one nodal direction, shape ``(n_b, n_b)``."""
        dT = self.schur_derivative(dgamma)
        return -self._Tinv @ dT @ self.disc.G

    def matrix(self, chunk: int = 256) -> np.ndarray:
        """All nodal directions at once, shape ``(n_vertices, n_b, n_b)``.

        Uses that ``dG`` for the hat function at vertex ``j`` only involves the
        triangles around ``j``, each weighted by 1/3.
        """
        mesh, E = self.mesh, self.disc.extension
        nb, nv = self.n_b, mesh.n_vertices
        dT = np.zeros((nv, nb * nb))
        tri = mesh.triangles
        for s in range(0, len(tri), chunk):
            t = tri[s:s + chunk]
            Et = E[t]  # (c, 3, nb)
            Pt = np.einsum("cai,cab,cbj->cij", Et, self._K0[s:s + chunk], Et).reshape(len(t), -1)
            inc = sp.csr_matrix((np.full(t.size, 1.0 / 3.0),
                                 (t.ravel(), np.repeat(np.arange(len(t)), 3))),
                                shape=(nv, len(t)))
            dT += inc @ Pt
        dT = dT.reshape(nv, nb, nb)
        return -(self._Tinv @ dT) @ self.disc.G


def linearized_forward(mesh: Mesh2D, base=1.0) -> LinearizedForward:
    return LinearizedForward(discretize(mesh, base))


def _boundary_restriction(fine: Mesh2D, coarse: Mesh2D):
    """Current prolongation (coarse -> fine) and voltage restriction (fine -> coarse)
    on the active boundary spaces."""
    P = boundary_transfer(coarse, fine)[1:, 1:]
    R = boundary_transfer(fine, coarse)[1:, 1:]
    return P, R


def simulate_data(scenario: EITScenario, mode: str = "linearized",
                  data_mesh: Mesh2D | None = None, inversion_mesh: Mesh2D | None = None,
                  rng: np.random.Generator | None = None) -> DataSequence:
    """Synthetic NtD data on the inversion mesh's active boundary space.

    Each sample is an ``(n_b, n_b)`` matrix, flattened row-major:
    ``F'(1)(gamma - 1)`` in ``"linearized"`` mode, ``G(gamma) - G(1)`` in
    ``"nonlinear"`` mode, both evaluated on ``data_mesh`` and transferred by
    boundary interpolation. Noise, if requested, is entrywise Gaussian
    rescaled to ``noise_fraction`` of each sample's Hilbert-Schmidt norm.
    """
    if mode not in ("linearized", "nonlinear"):
        raise InvalidScenario(f"unknown data mode {mode!r}")
    if inversion_mesh is None:
        inversion_mesh = build_mesh(scenario.grid_subdivisions)
    if data_mesh is None:
        data_mesh = inversion_mesh
    if data_mesh.n_vertices <= inversion_mesh.n_vertices:
        warnings.warn("data mesh is not finer than the inversion mesh (inverse crime)",
                      stacklevel=2)
    if rng is None:
        rng = np.random.default_rng(0)

    base = discretize(data_mesh, 1.0)
    lin = LinearizedForward(base) if mode == "linearized" else None
    P, R = _boundary_restriction(data_mesh, inversion_mesh)
    hs = HSEmbedding(discretize(inversion_mesh, 1.0).Mb) if scenario.noise_fraction else None

    samples = []
    noise_max = 0.0
    for t in scenario.time_grid.nodes:
        gamma = nodal_inclusion(data_mesh, scenario.center(t), scenario.inclusion_radius,
                                scenario.inclusion_contrast)
        if mode == "linearized":
            dG = lin.apply(gamma.nodal_values - 1.0)
        else:
            dG = discretize(data_mesh, gamma).G - base.G
        y = R @ dG @ P
        if scenario.noise_fraction:
            noise = rng.standard_normal(y.shape)
            target = scenario.noise_fraction * hs.norm(y)
            size = hs.norm(noise)
            noise = noise * (target / size) if size > 0 else noise * 0.0
            noise_max = max(noise_max, hs.norm(noise))
            y = y + noise
        samples.append(y.ravel())
    return DataSequence(np.array(samples), noise_level=noise_max)


INITIAL_GUESSES = ("tikhonov", "zero")


def _initial_state(problem, alpha: float, u0: str) -> np.ndarray:
    if u0 == "zero":
        return np.zeros(problem.m)
    if u0 == "tikhonov":
        A = problem.normal_matrices[0] + alpha * np.eye(problem.m)
        return sla.solve(A, problem.normal_rhs[0], assume_a="pos")
    raise InvalidScenario(f"unknown initial guess {u0!r}")


@dataclass(frozen=True, eq=False)
class EITExperiment:
    """Inversion-ready bundle plus the pieces needed to interpret it."""

    scenario: EITScenario
    mesh: Mesh2D
    problem: object
    embedding: HSEmbedding
    raw_data: DataSequence
    initial_guess: str = "tikhonov"

    def truth(self, t: float) -> np.ndarray:
        """Exact ``gamma - 1`` at the inversion-mesh vertices."""
        s = self.scenario
        return nodal_inclusion(self.mesh, s.center(t), s.inclusion_radius,
                               s.inclusion_contrast).nodal_values - 1.0

    def with_alpha(self, alpha: float) -> "EITExperiment":
        """Same operator and data, new ``alpha`` (and a matching initial state)."""
        p = self.problem.with_alpha(alpha)
        p = p.with_start(_initial_state(p, alpha, self.initial_guess))
        return EITExperiment(self.scenario, self.mesh, p, self.embedding, self.raw_data,
                             self.initial_guess)


def build_eit_experiment(scenario: EITScenario, alpha: float, mode: str = "linearized",
                         data_subdivisions: int | None = None, seed: int = 0,
                         u0: str = "tikhonov",
                         raw_data: DataSequence | None = None) -> EITExperiment:
    """Assemble the linearized dynamic EIT inverse problem.

    Operator and data are expressed in Hilbert-Schmidt coordinates
    (:class:`HSEmbedding`), so the plain Euclidean data norm used by the
    solvers is the Hilbert-Schmidt norm. The unknown is the nodal
    ``gamma - 1`` on the inversion mesh. ``u0="tikhonov"`` starts from the
    static Tikhonov solution of the first sample with the same ``alpha``;
    ``u0="zero"`` starts from the background.

    Data are simulated on an unstructured mesh with ``data_subdivisions``
    (default twice the inversion resolution) unless ``raw_data`` is given.
    ``seed`` drives both that mesh and the measurement noise.
    """
    if u0 not in INITIAL_GUESSES:
        raise InvalidScenario(f"unknown initial guess {u0!r}")
    mesh = build_mesh(scenario.grid_subdivisions)
    if raw_data is None:
        n_fine = data_subdivisions or 2 * scenario.grid_subdivisions
        mesh_seed, noise_seed = np.random.SeedSequence(seed).spawn(2)
        data_mesh = build_mesh(n_fine, structured=False,
                               seed=np.random.default_rng(mesh_seed))
        raw_data = simulate_data(scenario, mode, data_mesh, mesh,
                                 np.random.default_rng(noise_seed))
    lin = linearized_forward(mesh)
    hs = HSEmbedding(lin.disc.Mb)
    F = hs.embed(lin.matrix()).T  # (n_b^2, n_vertices)
    nb = lin.n_b
    if raw_data.samples.shape != (scenario.time_samples, nb * nb):
        raise InvalidScenario(
            f"raw data shape {raw_data.samples.shape} does not match the scenario")
    y = hs.embed(raw_data.samples.reshape(-1, nb, nb))
    grid = scenario.time_grid
    problem = validate_problem(OperatorSequence.constant(F, grid.n_nodes),
                               DataSequence(y, raw_data.noise_level), grid,
                               RegConfig(alpha, np.zeros(F.shape[1])))
    problem = problem.with_start(_initial_state(problem, alpha, u0))
    return EITExperiment(scenario, mesh, problem, hs, raw_data, u0)
