import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import kron_lift, qmr_iterates, random_system, unlift
from solver_utils import iterates, max_rel_diff, run_traj
from krylov_mrhs.instrumentation import expected_vector_ops
from krylov_mrhs.linalg import SparseMatrix
from krylov_mrhs.solvers import SolveConfig, solve

QMR = ["li-qmr", "gl-qmr", "egl-qmr"]


@pytest.mark.parametrize("method", QMR)
@given(seed=st.integers(0, 10**6))
def test_reduction_s1(method, seed):
    a, b = random_system(20, 1, seed)
    _, rep, recs = run_traj(method, a, b)
    xs = [x[:, 0] for x in iterates(recs)]
    ref = qmr_iterates(a, b[:, 0], b[:, 0], min(len(xs), 19))
    assert max_rel_diff(xs, ref, np.linalg.norm(np.linalg.solve(a, b))) <= 1e-12


def test_li_columns_match_single_rhs():
    a, b = random_system(50, 3, seed=21)
    _, rep, recs = run_traj("li-qmr", a, b)
    xs = iterates(recs)
    for i in range(3):
        ref = qmr_iterates(a, b[:, i], b[:, i], min(len(xs), 30))
        col = [x[:, i] for x in xs]
        assert max_rel_diff(col, ref, np.linalg.norm(ref[-1])) <= 1e-10


def test_gl_matches_kron_lift():
    a, b = random_system(8, 2, seed=22)
    big, vec_b = kron_lift(a, b)
    _, rep, recs = run_traj("gl-qmr", a, b)
    xs = iterates(recs)
    ref = [unlift(x, 8) for x in qmr_iterates(big, vec_b, vec_b, min(len(xs), 15))]
    assert max_rel_diff(xs, ref, np.linalg.norm(np.linalg.solve(a, b))) <= 1e-12


def test_egl_equals_gl_with_rank_one_shadow():
    a, b = random_system(30, 4, seed=23)
    w = b.mean(axis=1)
    _, rep_e, e = run_traj("egl-qmr", a, b)
    _, rep_g, g = run_traj("gl-qmr", a, b, shadow=np.outer(w, np.ones(4)))
    assert rep_e.iterations == rep_g.iterations
    assert max_rel_diff(iterates(e), iterates(g), np.linalg.norm(np.linalg.solve(a, b))) <= 1e-12
    assert rep_e.matvec_cols_AH == rep_e.iterations
    assert rep_g.matvec_cols_AH == 4 * rep_g.iterations


@pytest.mark.parametrize("method", ["gl-qmr", "li-qmr", "egl-qmr"])
def test_quasi_residual_bound_and_monotone(method):
    a, b = random_system(40, 3, seed=24)
    _, rep, recs = run_traj(method, a, b, keep=("x", "tau", "estimate"))
    b_norm = np.linalg.norm(b)
    taus = [np.linalg.norm(r["tau"]) for r in recs[1:]]
    assert all(t1 <= t0 for t0, t1 in zip(taus, taus[1:]))
    for r in recs[1:]:
        true = np.linalg.norm(b - a @ r["x"])
        assert true <= r["estimate"] * (1 + 1e-8) + 1e-13 * b_norm


def test_lanczos_biorthogonality():
    a, b = random_system(40, 3, seed=25)
    _, _, recs = run_traj("gl-qmr", a, b, keep=("v", "w"))
    recs = [r for r in recs if r["k"] > 0][:8]
    for i, ri in enumerate(recs):
        for j, rj in enumerate(recs):
            if i != j:
                assert abs(np.vdot(ri["w"], rj["v"])) <= 1e-8


@pytest.mark.parametrize("method", QMR)
def test_counters(method):
    a, b = random_system(60, 4, seed=26)
    _, rep = solve(method, SparseMatrix.from_dense(a), b, SolveConfig(tol=1e-30, maxit=10))
    k = rep.iterations
    assert rep.matvec_cols_AH == (k if method.startswith("egl") else 4 * k)
    assert rep.matvec_cols_A >= 4 * k
    assert rep.vector_ops == expected_vector_ops(method, 4, k)


def test_true_residual_confirmed():
    a, b = random_system(40, 3, seed=27)
    for m in QMR:
        _, rep = solve(m, SparseMatrix.from_dense(a), b)
        assert rep.converged and rep.final_relative_residual <= 1e-10
