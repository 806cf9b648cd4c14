import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from krylov_mrhs.exceptions import DimensionError
from krylov_mrhs.linalg import SparseMatrix
from krylov_mrhs.precond import ilu0
from krylov_mrhs.problems import (EX5_SHIFT, GridSpec2D, GridSpec3D, RankDeficiencyWarning,
                                  compute_rho, exact_solution_3d, gen_advection_3d,
                                  gen_conv_diff_2d, gen_honeycomb, preprocess_rhs, random_rhs,
                                  shifted_problem, unit_vector_rhs)


def row_counts(a):
    return np.diff(a.row_ptr)


class TestConvDiff2D:
    def test_full_scale_sizes(self):
        p = gen_conv_diff_2d(GridSpec2D(200))
        assert p.meta["n"] == 40000 and p.s == 4
        assert p.a.nnz == 5 * 40000 - 4 * 200 == 199200
        assert round(p.meta["rho"], 2) == 0.80

    def test_symmetric_without_convection(self):
        d = gen_conv_diff_2d(GridSpec2D(6, 0.0, 0.0, 0.0)).a.to_dense()
        np.testing.assert_array_equal(d, d.T)

    def test_nonsymmetric_with_convection(self):
        d = gen_conv_diff_2d(GridSpec2D(6)).a.to_dense()
        assert not np.allclose(d, d.T)

    def test_stencil_values(self):
        g = GridSpec2D(5, 1.0, 2.0, 3.0)
        d = gen_conv_diff_2d(g).a.to_dense()
        h = g.h
        c = 2 + 5 * 2  # interior unknown (i, j) = (2, 2)
        assert d[c, c] == pytest.approx(4 / h**2 - 6)
        assert d[c, c + 1] == pytest.approx(-1 / h**2 + 1 / h)
        assert d[c, c - 1] == pytest.approx(-1 / h**2 - 1 / h)
        assert d[c, c + 5] == pytest.approx(-1 / h**2 + 2 / h)
        assert d[c, c - 5] == pytest.approx(-1 / h**2 - 2 / h)

    def test_superposition(self):
        p = gen_conv_diff_2d(GridSpec2D(8))
        d = p.a.to_dense()
        x = np.linalg.solve(d, p.b)
        # the four corner functions sum to the constant 1 on the boundary;
        # that rhs is -sum of boundary couplings, assembled here independently
        h = 1 / 9
        m = 8
        i, j = np.arange(64) % m, np.arange(64) // m
        ones_rhs = np.zeros(64, dtype=complex)
        ones_rhs[i == 0] += 1 / h**2 + 5 / h
        ones_rhs[i == m - 1] += 1 / h**2 - 5 / h
        ones_rhs[j == 0] += 1 / h**2 + 5 / h
        ones_rhs[j == m - 1] += 1 / h**2 - 5 / h
        x1 = np.linalg.solve(d, ones_rhs)
        assert np.abs(x.sum(axis=1) - x1).max() <= 1e-10

    def test_constant_boundary_data_gives_constant_solution(self):
        # without convection and reaction, u == 1 solves the problem with g == 1
        p = gen_conv_diff_2d(GridSpec2D(8, 0.0, 0.0, 0.0))
        x = np.linalg.solve(p.a.to_dense(), p.b.sum(axis=1))
        np.testing.assert_allclose(x, 1.0, atol=1e-12)

    def test_corner_data_at_corner_node(self):
        p = gen_conv_diff_2d(GridSpec2D(4, 0.0, 0.0, 0.0))
        h = 1 / 5
        # unknown (0,0) touches boundary points (0, h) and (h, 0); both have g_00 = 1 - h
        assert p.b[0, 0].real == pytest.approx(2 * (1 - h) / h**2)
        assert p.b[0, 3] == 0

    def test_row_census(self):
        m = 7
        a = gen_conv_diff_2d(GridSpec2D(m)).a
        cnt = row_counts(a).reshape(m, m)
        assert np.all(cnt[1:-1, 1:-1] == 5)
        assert set(np.unique(cnt)) == {3, 4, 5}
        assert cnt[0, 0] == 3 and cnt[0, 3] == 4

    def test_max_principle(self):
        p = gen_conv_diff_2d(GridSpec2D(8, 0.0, 0.0, 0.0))
        x = np.linalg.solve(p.a.to_dense(), p.b).real
        assert x.min() >= -1e-12 and x.max() <= 1 + 1e-12

    def test_invalid_grid(self):
        with pytest.raises(ValueError):
            GridSpec2D(1)


class TestAdvection3D:
    def test_full_scale_sizes(self):
        p = gen_advection_3d(GridSpec3D(50))
        assert p.meta["n"] == 125000 and p.s == 19
        assert p.a.nnz == 7 * 125000 - 6 * 2500 == 860000
        assert round(p.meta["rho"], 2) == 2.76

    def test_symmetric_without_advection(self):
        d = gen_advection_3d(GridSpec3D(4, 0.0)).a.to_dense()
        np.testing.assert_array_equal(d, d.T)

    def test_first_column_exact_solution(self):
        p = gen_advection_3d(GridSpec3D(10, 1000.0))
        x = np.linalg.solve(p.a.to_dense(), p.b[:, 0])
        np.testing.assert_allclose(x, exact_solution_3d(10), atol=1e-10)

    def test_face_columns(self):
        m = 5
        p = gen_advection_3d(GridSpec3D(m, 0.0))
        h = 1 / (m + 1)
        idx = np.arange(m**3)
        i, j, k = idx % m, (idx // m) % m, idx // m**2
        # x = 0 face, boundary function y: only nodes with i == 0 are touched
        col = p.b[:, 1]
        assert np.all(col[i != 0] == 0)
        np.testing.assert_allclose(col[i == 0], -(1 / h**2) * (j[i == 0] + 1) * h)
        # z = 1 face, constant function
        col = p.b[:, 18]
        np.testing.assert_allclose(col[k == m - 1], -1 / h**2)
        assert np.all(col[k != m - 1] == 0)

    def test_constant_boundary_data(self):
        p = gen_advection_3d(GridSpec3D(6, 10.0))
        rhs = sum(p.b[:, 3 + 3 * f] for f in range(6))
        x = np.linalg.solve(p.a.to_dense(), rhs)
        np.testing.assert_allclose(x, 1.0, atol=1e-10)

    def test_row_census(self):
        m = 5
        cnt = row_counts(gen_advection_3d(GridSpec3D(m)).a).reshape(m, m, m)
        assert np.all(cnt[1:-1, 1:-1, 1:-1] == 7)
        assert set(np.unique(cnt)) == {4, 5, 6, 7}

    def test_max_principle(self):
        p = gen_advection_3d(GridSpec3D(8, 0.0))
        rhs = sum(p.b[:, 3 + 3 * f] for f in range(6))
        x = np.linalg.solve(p.a.to_dense(), rhs).real
        assert x.min() >= -1e-12 and x.max() <= 1 + 1e-12


class TestRHS:
    def test_unit_vectors(self):
        np.testing.assert_array_equal(unit_vector_rhs(5, 2), np.eye(5)[:, :2])
        with pytest.raises(DimensionError):
            unit_vector_rhs(2, 3)

    def test_random_reproducible(self):
        np.testing.assert_array_equal(random_rhs(30, 4, seed=3), random_rhs(30, 4, seed=3))
        assert not np.array_equal(random_rhs(30, 4, seed=3), random_rhs(30, 4, seed=4))

    def test_random_norm_scale(self):
        n = 10**4
        norms = np.linalg.norm(random_rhs(n, 5, seed=1), axis=0)
        assert np.all(np.abs(norms / np.sqrt(2 * n) - 1) <= 0.2)

    def test_preprocess_orthonormal(self):
        p = gen_conv_diff_2d(GridSpec2D(50))
        q = preprocess_rhs(p.b)
        assert np.linalg.norm(q.conj().T @ q - np.eye(4)) <= 1e-13

    def test_preprocess_already_orthonormal(self, rng):
        b = np.linalg.qr(rng.standard_normal((10, 3)) + 1j * rng.standard_normal((10, 3)))[0]
        q = preprocess_rhs(b)
        phases = np.diag(b.conj().T @ q)
        np.testing.assert_allclose(np.abs(phases), 1, atol=1e-13)
        np.testing.assert_allclose(q, b * phases, atol=1e-13)

    def test_preprocess_flags_rank_deficiency(self, rng):
        w = rng.standard_normal(8)
        with pytest.warns(RankDeficiencyWarning):
            res = preprocess_rhs(np.column_stack([w, 2 * w]), return_factor=True)
        assert res.rank_estimate == 1

    def test_preprocess_full_rank_is_silent(self, rng):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            preprocess_rhs(rng.standard_normal((8, 3)))


class TestRhoAndShift:
    def test_rho_exact(self):
        a = SparseMatrix.identity(10)
        assert compute_rho(a, 1) == 1.0
        assert compute_rho(gen_honeycomb(4, 4), 4) == 1.0

    def test_rho_with_factors(self):
        p = gen_conv_diff_2d(GridSpec2D(20))
        f = ilu0(p.a)
        assert compute_rho(p.a, 4, f) == pytest.approx(4 * 400 / (p.a.nnz + f.l.nnz + f.u.nnz))

    def test_honeycomb_surrogate(self):
        a = gen_honeycomb(10, 8)
        n = a.n_rows
        assert a.nnz == 4 * n
        assert round(compute_rho(a, 20), 2) == 5.00
        d = a.to_dense()
        np.testing.assert_array_equal(d, d.conj().T)

    def test_shift_zero_is_identity_operator(self):
        p = gen_conv_diff_2d(GridSpec2D(4))
        sp_ = shifted_problem(p.a, 0.0, p.b)
        np.testing.assert_array_equal(sp_.operator().to_dense(), p.a.to_dense())

    def test_shifted_bundle(self):
        a = gen_honeycomb(4, 2)
        b = random_rhs(a.n_rows, 20, seed=0)
        p = shifted_problem(a, EX5_SHIFT, b)
        assert p.meta["rho"] == compute_rho(a, 20) and p.shift == EX5_SHIFT
        d = a.to_dense() - EX5_SHIFT * np.eye(16)
        np.testing.assert_allclose(p.operator().to_dense(), d, atol=1e-15)
        with pytest.raises(DimensionError):
            shifted_problem(a, EX5_SHIFT, b[:5])

    @given(m=st.integers(2, 9), a1=st.floats(-10, 10), nu=st.floats(0, 2000))
    def test_rho_consistent_with_meta(self, m, a1, nu):
        p = gen_conv_diff_2d(GridSpec2D(m, a1, 1.0, 0.5))
        assert p.meta["rho"] == compute_rho(p.a, p.s)
        assert p.meta["nnz"] == 5 * m * m - 4 * m
        q = gen_advection_3d(GridSpec3D(min(m, 5), nu))
        assert q.meta["rho"] == compute_rho(q.a, q.s)
        assert q.b.shape == (min(m, 5) ** 3, 19)
