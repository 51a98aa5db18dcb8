import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dynreg.core import DataSequence
from dynreg.eit import (ConductivityField, EITScenario, HSEmbedding, Mesh2D, assemble_stiffness,
                        boundary_mass, boundary_transfer, build_eit_experiment, build_mesh,
                        discretize, element_stiffness, full_system_trace,
                        hilbert_schmidt_basis_sum, hilbert_schmidt_inner, linearized_forward,
                        nodal_inclusion, ntd_operator, simulate_data)
from dynreg.errors import EllipticityViolation, InvalidMeshSpec, InvalidScenario

seeds = st.integers(0, 2**32 - 1)


@pytest.fixture(scope="module")
def mesh4():
    return build_mesh(4)


class TestMesh:
    def test_counts_small(self):
        m = build_mesh(2)
        assert (m.n_vertices, m.n_triangles, len(m.boundary_vertices)) == (9, 8, 8)

    def test_counts_reference_grid(self):
        m = build_mesh(25)
        assert (m.n_vertices, m.n_triangles) == (676, 1250)
        assert len(m.boundary_vertices) == 100

    @pytest.mark.parametrize("n", [1, 0, 2.5])
    def test_rejects(self, n):
        with pytest.raises(InvalidMeshSpec):
            build_mesh(n)

    @pytest.mark.parametrize("structured", [True, False])
    def test_invariants(self, structured):
        m = build_mesh(7, structured=structured, seed=3)
        assert np.all(m.areas() > 0)
        assert m.areas().sum() == pytest.approx(1.0)
        both = np.concatenate([m.boundary_vertices, m.interior_vertices])
        np.testing.assert_array_equal(np.sort(both), np.arange(m.n_vertices))
        assert m.reference_index == m.boundary_vertices[0]
        np.testing.assert_array_equal(m.vertices[m.reference_index], [0.0, 0.0])

    def test_unstructured_is_seeded(self):
        a = build_mesh(6, structured=False, seed=1)
        b = build_mesh(6, structured=False, seed=1)
        c = build_mesh(6, structured=False, seed=2)
        np.testing.assert_array_equal(a.vertices, b.vertices)
        assert not np.array_equal(a.vertices, c.vertices)
        # boundary nodes match the structured mesh
        s = build_mesh(6)
        np.testing.assert_allclose(a.vertices[a.boundary_vertices], s.vertices[s.boundary_vertices])

    def test_boundary_is_counter_clockwise(self, mesh4):
        p = mesh4.vertices[mesh4.boundary_vertices]
        q = np.roll(p, -1, axis=0)
        signed = 0.5 * np.sum(p[:, 0] * q[:, 1] - q[:, 0] * p[:, 1])
        assert signed == pytest.approx(1.0)

    def test_transfer(self, mesh4):
        fine = build_mesh(8, structured=False)
        np.testing.assert_allclose(boundary_transfer(mesh4, mesh4), np.eye(16), atol=1e-14)
        P = boundary_transfer(mesh4, fine)
        np.testing.assert_allclose(P.sum(axis=1), 1.0)
        # piecewise-linear data on the coarse boundary is reproduced exactly
        x = mesh4.vertices[mesh4.boundary_vertices]
        f = x[:, 0] + 2 * x[:, 1]
        xf = fine.vertices[fine.boundary_vertices]
        np.testing.assert_allclose(P @ f, xf[:, 0] + 2 * xf[:, 1], atol=1e-12)


class TestStiffness:
    def test_unit_triangle(self):
        tri = Mesh2D(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), np.array([[0, 1, 2]]),
                     np.array([0, 1, 2]), np.array([], dtype=int), 0)
        expected = [[1, -0.5, -0.5], [-0.5, 0.5, 0], [-0.5, 0, 0.5]]
        np.testing.assert_allclose(element_stiffness(tri)[0], expected, atol=1e-15)

    def test_constant_coefficient(self, mesh4):
        K1 = assemble_stiffness(mesh4, 1.0).full
        K2 = assemble_stiffness(mesh4, 2.0).full
        assert np.abs(np.asarray(K1.sum(axis=1))).max() <= 1e-12
        assert abs(K2 - 2 * K1).max() == 0.0
        assert abs(K1 - K1.T).max() <= 1e-15

    def test_blocks_partition(self, mesh4):
        b = assemble_stiffness(mesh4, 1.0)
        ni, nb = len(mesh4.interior_vertices), mesh4.n_active
        assert b.A11.shape == (ni, ni) and b.A12.shape == (ni, nb)
        assert b.A21.shape == (nb, ni) and b.A22.shape == (nb, nb)

    @pytest.mark.parametrize("bad", [0.0, -1.0, 1e-7, np.nan])
    def test_ellipticity(self, mesh4, bad):
        v = np.ones(mesh4.n_vertices)
        v[5] = bad
        with pytest.raises(EllipticityViolation):
            ConductivityField(v)


class TestBoundaryMass:
    def test_entries(self, mesh4):
        M = boundary_mass(mesh4, remove_reference=False)
        h = 0.25
        assert M[0, 1] == pytest.approx(h / 6)
        assert M[1, 1] == pytest.approx(2 * h / 3)
        assert M[0, 5] == 0.0  # supports are disjoint
        assert M.sum() == pytest.approx(4.0)
        np.testing.assert_array_equal(M, M.T)

    def test_active_space_spd(self, mesh4):
        M = boundary_mass(mesh4)
        assert M.shape == (15, 15)
        assert np.linalg.eigvalsh(M).min() > 0


class TestNtD:
    def test_constant_scaling(self, mesh4):
        G1 = discretize(mesh4).G
        for c in (0.3, 4.0):
            np.testing.assert_allclose(discretize(mesh4, c).G, G1 / c, rtol=1e-12)

    @given(seeds)
    def test_symmetric_structure(self, seed):
        mesh = build_mesh(5)
        rng = np.random.default_rng(seed)
        disc = discretize(mesh, rng.uniform(0.2, 5.0, mesh.n_vertices))
        S = disc.G @ np.linalg.inv(disc.Mb)
        assert np.linalg.norm(S - S.T) <= 1e-9 * np.linalg.norm(S)
        # the quadratic form is positive definite on the active space
        assert np.linalg.eigvalsh(0.5 * (S + S.T)).min() > 0

    def test_full_solve(self, mesh4, rng):
        gamma = nodal_inclusion(mesh4, (0.5, 0.5), 0.3, 2.0)
        disc = discretize(mesh4, gamma)
        g = rng.standard_normal(disc.n_b)
        v = full_system_trace(mesh4, gamma, g)
        np.testing.assert_allclose(disc.G @ g, v, rtol=1e-10)

    def test_standalone_operator(self, mesh4):
        disc = discretize(mesh4, 1.5)
        np.testing.assert_allclose(ntd_operator(disc.blocks, disc.Mb), disc.G, rtol=1e-13)
        assert np.isfinite(disc.schur_condition())

    def test_extension_is_harmonic(self, mesh4):
        disc = discretize(mesh4)
        r = disc.blocks.full @ disc.extension
        np.testing.assert_allclose(r[mesh4.interior_vertices], 0.0, atol=1e-12)


class TestHilbertSchmidt:
    def test_identity(self):
        assert hilbert_schmidt_inner(np.eye(7), np.eye(7)) == 7.0

    def test_symmetric(self, rng):
        A, B = rng.standard_normal((2, 6, 6))
        assert hilbert_schmidt_inner(A, B) == pytest.approx(hilbert_schmidt_inner(B, A), rel=1e-14)

    @pytest.mark.parametrize("n", [2, 4, 8])
    def test_basis_sum(self, n, rng):
        mesh = build_mesh(n)
        Mb = discretize(mesh).Mb
        G1 = discretize(mesh, rng.uniform(1, 3, mesh.n_vertices)).G
        G2 = discretize(mesh, rng.uniform(1, 3, mesh.n_vertices)).G
        ref = hilbert_schmidt_basis_sum(G1, G2, Mb)
        assert hilbert_schmidt_inner(G1, G2) == pytest.approx(ref, rel=1e-9)
        assert HSEmbedding(Mb).inner(G1, G2) == pytest.approx(ref, rel=1e-9)

    def test_embedding_round_trip(self, mesh4, rng):
        hs = HSEmbedding(discretize(mesh4).Mb)
        G = rng.standard_normal((15, 15))
        np.testing.assert_allclose(hs.unembed(hs.embed(G)), G, atol=1e-12)


class TestLinearized:
    def test_zero_direction(self, mesh4):
        lin = linearized_forward(mesh4)
        assert not lin.apply(np.zeros(mesh4.n_vertices)).any()

    def test_linear(self, mesh4, rng):
        lin = linearized_forward(mesh4)
        dg = rng.standard_normal(mesh4.n_vertices)
        base = lin.apply(dg)
        # powers of two scale every intermediate exactly
        np.testing.assert_array_equal(lin.apply(2.0 * dg), 2.0 * base)
        np.testing.assert_allclose(lin.apply(3.0 * dg), 3.0 * base,
                                   atol=1e-13 * np.abs(base).max())

    def test_matrix_matches_apply(self, mesh4, rng):
        lin = linearized_forward(mesh4)
        J = lin.matrix(chunk=5)
        dg = rng.standard_normal(mesh4.n_vertices)
        np.testing.assert_allclose(np.tensordot(dg, J, axes=1), lin.apply(dg), atol=1e-13)
        j = 7
        e = np.zeros(mesh4.n_vertices)
        e[j] = 1.0
        np.testing.assert_allclose(J[j], lin.apply(e), atol=1e-14)

    def test_taylor(self, mesh4, rng):
        lin = linearized_forward(mesh4)
        hs = HSEmbedding(lin.disc.Mb)
        dg = rng.uniform(-1, 1, mesh4.n_vertices)
        rem = [hs.norm(discretize(mesh4, 1 + h * dg).G - lin.disc.G - h * lin.apply(dg))
               for h in (1e-2, 1e-3)]
        assert np.log10(rem[0] / rem[1]) >= 1.9


class TestInclusion:
    def test_far_small(self):
        mesh = build_mesh(25)
        assert np.all(nodal_inclusion(mesh, (0.02, 0.02), 0.01, 2.0).nodal_values == 1.0)

    def test_center(self):
        mesh = build_mesh(25)
        v = nodal_inclusion(mesh, (0.5, 0.5), 0.08, 2.0).nodal_values
        inside = np.linalg.norm(mesh.vertices - 0.5, axis=1) <= 0.08
        assert inside.sum() > 1
        np.testing.assert_array_equal(v[inside], 3.0)
        np.testing.assert_array_equal(v[~inside], 1.0)

    def test_zero_contrast(self, mesh4):
        assert np.all(nodal_inclusion(mesh4, (0.5, 0.5), 0.3, 0.0).nodal_values == 1.0)

    def test_path(self):
        sc = EITScenario()
        np.testing.assert_allclose(sc.center(0.0), [0.2, 0.5])
        np.testing.assert_allclose(sc.center(0.25), [0.4, 0.3], atol=1e-15)
        np.testing.assert_allclose(sc.center(1.0), sc.center(0.0), atol=1e-15)

    @pytest.mark.parametrize("kw", [dict(grid_subdivisions=1), dict(time_samples=1),
                                    dict(inclusion_radius=0.0), dict(noise_fraction=1.0),
                                    dict(inclusion_contrast=-1.0)])
    def test_scenario_rejects(self, kw):
        with pytest.raises(InvalidScenario):
            EITScenario(**kw)


SMALL = dict(grid_subdivisions=6, time_samples=5, inclusion_radius=0.2)


class TestSimulateData:
    @pytest.mark.parametrize("mode", ["linearized", "nonlinear"])
    def test_zero_contrast(self, mode):
        sc = EITScenario(inclusion_contrast=0.0, **SMALL)
        data = simulate_data(sc, mode, build_mesh(12, structured=False), build_mesh(6))
        assert not data.samples.any()
        assert data.samples.shape == (5, 23 * 23)

    @pytest.mark.parametrize("mode", ["linearized", "nonlinear"])
    def test_noise_fraction(self, mode):
        fine, coarse = build_mesh(12, structured=False), build_mesh(6)
        clean = simulate_data(EITScenario(**SMALL), mode, fine, coarse)
        noisy = simulate_data(EITScenario(noise_fraction=0.05, **SMALL), mode, fine, coarse,
                              np.random.default_rng(4))
        hs = HSEmbedding(discretize(coarse).Mb)
        nb = coarse.n_active
        for y, yn in zip(clean.samples, noisy.samples):
            Y, Yn = y.reshape(nb, nb), yn.reshape(nb, nb)
            assert hs.norm(Yn - Y) / hs.norm(Y) == pytest.approx(0.05, abs=1e-12)
        assert noisy.noise_level > 0 and clean.noise_level == 0

    def test_linearized_close_to_nonlinear_for_weak_contrast(self):
        sc = EITScenario(inclusion_contrast=1e-3, **SMALL)
        fine, coarse = build_mesh(12, structured=False), build_mesh(6)
        a = simulate_data(sc, "linearized", fine, coarse).samples
        b = simulate_data(sc, "nonlinear", fine, coarse).samples
        assert np.linalg.norm(a - b) <= 1e-2 * np.linalg.norm(a)

    def test_inverse_crime_warning(self):
        with pytest.warns(UserWarning, match="inverse crime"):
            simulate_data(EITScenario(**SMALL))

    def test_no_warning_on_finer_mesh(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            simulate_data(EITScenario(**SMALL), data_mesh=build_mesh(12, structured=False))

    def test_rejects_mode(self):
        with pytest.raises(InvalidScenario):
            simulate_data(EITScenario(**SMALL), "quadratic")


class TestExperiment:
    def test_bundle(self):
        exp = build_eit_experiment(EITScenario(**SMALL), 1e-2, data_subdivisions=12)
        p = exp.problem
        assert (p.N, p.m, p.d) == (4, 49, 23 * 23)
        assert p.ops.all_equal()
        np.testing.assert_allclose(exp.embedding.norm(exp.raw_data.samples[2].reshape(23, 23)),
                                   np.linalg.norm(p.data.samples[2]), rtol=1e-12)
        assert exp.truth(0.0).shape == (49,)

    def test_initial_guess(self):
        exp = build_eit_experiment(EITScenario(**SMALL), 1e-2, data_subdivisions=12)
        p = exp.problem
        A = p.normal_matrices[0] + 1e-2 * np.eye(p.m)
        np.testing.assert_allclose(A @ p.cfg.u0, p.normal_rhs[0], atol=1e-10)
        q = exp.with_alpha(1e-1).problem
        assert q.alpha == 1e-1 and not np.allclose(q.cfg.u0, p.cfg.u0)
        z = build_eit_experiment(EITScenario(**SMALL), 1e-2, raw_data=exp.raw_data, u0="zero")
        assert not z.problem.cfg.u0.any()
        assert z.problem.data == p.data

    def test_raw_data_shape(self):
        with pytest.raises(InvalidScenario):
            build_eit_experiment(EITScenario(**SMALL), 1e-2, raw_data=DataSequence(np.zeros((5, 4))))

    def test_rejects_initial_guess(self):
        with pytest.raises(InvalidScenario):
            build_eit_experiment(EITScenario(**SMALL), 1e-2, u0="mean")
