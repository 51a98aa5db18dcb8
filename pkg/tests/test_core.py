import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from dynreg.core import (DataSequence, OperatorSequence, Problem, RegConfig, RiccatiSolution,
                         TimeGrid, Trajectory, Weight, operator_norm_max, validate_problem)
from dynreg.errors import DimensionMismatch, InvalidWeight, NonFinite, ProblemError


def _minimal():
    return validate_problem(np.ones((2, 1, 1)), np.ones((2, 1)), TimeGrid(1.0, 1),
                            RegConfig(1.0, [0.0]))


class TestTimeGrid:
    def test_nodes_and_step(self):
        g = TimeGrid(2.0, 4)
        assert g.dt == 0.5
        np.testing.assert_array_equal(g.nodes, [0, 0.5, 1, 1.5, 2])
        assert g.n_nodes == 5

    @given(st.floats(0.01, 100), st.integers(1, 10_000))
    def test_step_times_count_is_span(self, T, n):
        g = TimeGrid(T, n)
        assert g.dt * g.n_steps == pytest.approx(T, rel=1e-15)
        assert g.nodes[-1] == pytest.approx(T, rel=1e-14)

    @pytest.mark.parametrize("kw", [dict(t_end=0.0, n_steps=1), dict(t_end=1.0, n_steps=0),
                                    dict(t_end=1.0, n_steps=2.5)])
    def test_rejects(self, kw):
        with pytest.raises(ProblemError):
            TimeGrid(**kw)

    def test_refined(self):
        assert TimeGrid(1.0, 3).refined(2) == TimeGrid(1.0, 6)


class TestOperatorSequence:
    def test_constant_is_a_view(self):
        F = np.arange(6.0).reshape(2, 3)
        seq = OperatorSequence.constant(F, 1000)
        assert seq.shape == (1000, 2, 3)
        assert seq.ops.strides[0] == 0
        assert seq.all_equal()
        assert seq == OperatorSequence(np.broadcast_to(F, (1000, 2, 3)))

    def test_immutable(self):
        seq = OperatorSequence(np.zeros((2, 1, 1)))
        with pytest.raises(ValueError):
            seq.ops[0, 0, 0] = 1.0

    def test_bad_rank(self):
        with pytest.raises(DimensionMismatch):
            OperatorSequence(np.zeros((2, 2)))


class TestWeight:
    def test_identity_and_scaled(self):
        assert Weight.identity().norm(0) == 1.0
        np.testing.assert_array_equal(Weight.scaled(2.0).apply(0, np.ones(3)), 2 * np.ones(3))

    def test_explicit_spd(self):
        W = Weight.explicit(np.diag([1.0, 4.0]))
        assert W.norm(0) == pytest.approx(4.0)
        assert not W.is_scalar

    @pytest.mark.parametrize("M", [np.array([[1.0, 2.0], [0.0, 1.0]]), -np.eye(2),
                                   np.diag([1.0, 0.0])])
    def test_explicit_rejects_non_spd(self, M):
        with pytest.raises(InvalidWeight):
            Weight.explicit(M)

    def test_scaled_must_be_positive(self):
        with pytest.raises(InvalidWeight):
            Weight.scaled(0.0)


class TestValidateProblem:
    def test_minimal_bundle(self):
        p = _minimal()
        assert isinstance(p, Problem)
        assert (p.N, p.m, p.d) == (1, 1, 1)

    def test_length_mismatch(self):
        with pytest.raises(DimensionMismatch) as exc:
            validate_problem(np.ones((3, 1, 1)), np.ones((2, 1)), TimeGrid(1.0, 2),
                             RegConfig(1.0, [0.0]))
        assert exc.value.component == "data"
        assert exc.value.found == 2

    def test_alpha_zero(self):
        with pytest.raises(InvalidWeight):
            RegConfig(0.0, [0.0])

    def test_u0_dimension(self):
        with pytest.raises(DimensionMismatch):
            validate_problem(np.ones((2, 1, 2)), np.ones((2, 1)), TimeGrid(1.0, 1),
                             RegConfig(1.0, [0.0]))

    def test_data_dimension(self):
        with pytest.raises(DimensionMismatch):
            validate_problem(np.ones((2, 2, 1)), np.ones((2, 1)), TimeGrid(1.0, 1),
                             RegConfig(1.0, [0.0]))

    def test_nonfinite_index(self):
        F = np.ones((3, 2, 2))
        F[2, 1, 0] = np.nan
        with pytest.raises(NonFinite) as exc:
            validate_problem(F, np.ones((3, 2)), TimeGrid(1.0, 2), RegConfig(1.0, [0.0, 0.0]))
        assert exc.value.index == (2, 1, 0)

    def test_nonfinite_data(self):
        y = np.ones((2, 1))
        y[1, 0] = np.inf
        with pytest.raises(NonFinite):
            validate_problem(np.ones((2, 1, 1)), y, TimeGrid(1.0, 1), RegConfig(1.0, [0.0]))

    def test_explicit_weight_shape(self):
        cfg = RegConfig(1.0, [0.0], Weight.explicit(np.eye(3)))
        with pytest.raises(DimensionMismatch):
            validate_problem(np.ones((2, 2, 1)), np.ones((2, 2)), TimeGrid(1.0, 1), cfg)

    @given(st.integers(1, 4), st.integers(1, 4), st.integers(1, 6), st.integers(0, 2**32 - 1))
    def test_idempotent(self, m, d, n, seed):
        rng = np.random.default_rng(seed)
        p = validate_problem(rng.standard_normal((n + 1, d, m)), rng.standard_normal((n + 1, d)),
                             TimeGrid(1.0, n), RegConfig(0.5, rng.standard_normal(m)))
        assert validate_problem(p) == p
        assert validate_problem(validate_problem(p)) == p

    def test_with_alpha_keeps_normal_equations(self):
        p = _minimal()
        G = p.normal_matrices
        q = p.with_alpha(3.0)
        assert q.alpha == 3.0 and q.normal_matrices is G
        assert q.data == p.data

    def test_with_start(self):
        p = _minimal().with_start([2.0])
        np.testing.assert_array_equal(p.cfg.u0, [2.0])
        with pytest.raises(DimensionMismatch):
            p.with_start([1.0, 2.0])


class TestNormalEquations:
    def test_constant_matches_general(self, rng):
        F = rng.standard_normal((3, 2))
        y = rng.standard_normal((5, 3))
        cfg = RegConfig(1.0, np.zeros(2), Weight.scaled(2.0))
        a = validate_problem(OperatorSequence.constant(F, 5), y, TimeGrid(1.0, 4), cfg)
        b = validate_problem(np.broadcast_to(F, (5, 3, 2)).copy(), y, TimeGrid(1.0, 4), cfg)
        np.testing.assert_allclose(a.normal_matrices, b.normal_matrices, rtol=1e-14)
        np.testing.assert_allclose(a.normal_rhs, b.normal_rhs, rtol=1e-14)
        np.testing.assert_allclose(a.normal_matrices[0], 2 * F.T @ F, rtol=1e-14)

    def test_explicit_weight(self, rng):
        F = rng.standard_normal((3, 4, 2))
        L = np.stack([np.diag(rng.uniform(1, 2, 4)) for _ in range(3)])
        y = rng.standard_normal((3, 4))
        p = validate_problem(F, y, TimeGrid(1.0, 2), RegConfig(1.0, np.zeros(2), Weight.explicit(L)))
        for k in range(3):
            np.testing.assert_allclose(p.normal_matrices[k], F[k].T @ L[k] @ F[k], rtol=1e-13)
            np.testing.assert_allclose(p.normal_rhs[k], F[k].T @ L[k] @ y[k], rtol=1e-13)


class TestOperatorNormMax:
    def test_zero(self):
        assert operator_norm_max(np.zeros((3, 2, 2))) == 0.0

    def test_identity(self):
        assert operator_norm_max(np.eye(3)[None]) == pytest.approx(1.0)

    def test_diagonal(self):
        assert operator_norm_max(np.stack([np.diag([3.0, 1.0]), np.diag([2.0, 2.0])])) == \
            pytest.approx(3.0)

    @given(hnp.arrays(float, hnp.array_shapes(min_dims=3, max_dims=3, max_side=4),
                      elements=st.floats(-10, 10)),
           st.floats(-5, 5))
    def test_homogeneous(self, F, c):
        assert operator_norm_max(c * F) == pytest.approx(abs(c) * operator_norm_max(F),
                                                         rel=1e-12, abs=1e-12)

    @given(hnp.arrays(float, hnp.array_shapes(min_dims=3, max_dims=3, max_side=4),
                      elements=st.floats(-10, 10)))
    def test_append_zero_operator(self, F):
        G = np.concatenate([F, np.zeros((1,) + F.shape[1:])])
        assert operator_norm_max(G) == operator_norm_max(F)

    def test_constant_sequence(self):
        F = np.diag([5.0, 1.0])
        assert operator_norm_max(OperatorSequence.constant(F, 10 ** 6)) == pytest.approx(5.0)


class TestContainers:
    def test_trajectory_rejects_nonfinite(self):
        with pytest.raises(NonFinite):
            Trajectory(np.array([[0.0], [np.nan]]))

    def test_data_noise_level(self):
        with pytest.raises(ProblemError):
            DataSequence(np.zeros((2, 1)), -1.0)

    def test_riccati_diagnostics(self):
        Q = np.stack([np.diag([2.0, 0.0]), np.array([[1.0, 0.5], [0.5, 1.0]])])
        r = RiccatiSolution(Q, np.zeros((2, 2)))
        assert r.is_symmetric_psd()
        np.testing.assert_allclose(r.norms(), [2.0, 1.5])
        np.testing.assert_allclose(r.min_eigenvalues(), [0.0, 0.5])
        bad = RiccatiSolution(np.array([[[1.0, 1.0], [0.0, 1.0]]]), np.zeros((1, 2)))
        assert not bad.is_symmetric_psd()
        assert bad.norms()[0] == pytest.approx(np.linalg.norm(bad.Q[0], 2))
        neg = RiccatiSolution(-np.eye(2)[None], np.zeros((1, 2)))
        assert not neg.is_symmetric_psd()
