import numpy as np
import pytest

from conftest import crandn
from krylov_mrhs.exceptions import DimensionError, UnknownMethod
from krylov_mrhs.linalg import SparseMatrix
from krylov_mrhs.problems import GridSpec3D, gen_advection_3d
from krylov_mrhs.solvers import (BREAKDOWN, CONVERGED, DIVERGED, METHODS, NOT_AVAILABLE,
                                 SolveConfig, get_solver, solve)

ALL = list(METHODS)


def test_registry():
    assert len(METHODS) == 12
    for bad in NOT_AVAILABLE:
        with pytest.raises(UnknownMethod) as exc:
            get_solver(bad)
        assert "unsupported method" in str(exc.value)


@pytest.mark.parametrize("kw", [dict(tol=0), dict(tol=-1), dict(maxit=0)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        SolveConfig(**kw)


@pytest.mark.parametrize("method", ALL)
def test_scalar_system(method):
    x, rep = solve(method, SparseMatrix.from_dense([[2.0]]), np.array([1.0]))
    assert rep.converged and rep.iterations == 1
    assert x[0, 0] == pytest.approx(0.5)


@pytest.mark.parametrize("method", ALL)
def test_identity_one_iteration(method, rng):
    b = crandn(rng, 7, 3)
    x, rep = solve(method, SparseMatrix.identity(7), b)
    assert rep.converged and rep.iterations == 1
    np.testing.assert_allclose(x, b, atol=1e-14)
    assert len(rep.history) == 2


@pytest.mark.parametrize("method", ALL)
def test_zero_rhs(method):
    x, rep = solve(method, SparseMatrix.identity(4), np.zeros((4, 2)))
    assert rep.converged and rep.iterations == 0 and not x.any()


@pytest.mark.parametrize("method", ALL)
def test_dimension_mismatch(method):
    with pytest.raises(DimensionError):
        solve(method, SparseMatrix.identity(4), np.ones((5, 2)))


@pytest.mark.parametrize("method", ALL)
def test_report_contract(method, rng):
    n, s = 30, 3
    a = 3 * np.eye(n) + crandn(rng, n, n) / np.sqrt(2 * n)
    b = crandn(rng, n, s)
    x, rep = solve(method, SparseMatrix.from_dense(a), b)
    assert rep.status == CONVERGED and rep.history
    true = np.linalg.norm(b - a @ x) / np.linalg.norm(b)
    assert rep.final_relative_residual == pytest.approx(true, rel=1e-6, abs=1e-14)
    assert abs(rep.history[-1] - rep.final_relative_residual) <= 1e-6
    assert rep.wall_time > 0
    assert len(rep.matvec_history) == len(rep.history)
    assert np.all(np.diff(rep.matvec_history) >= 0)
    s_ = rep.summary()
    assert s_["method"] == method and s_["iterations"] == rep.iterations


def test_no_history_when_disabled(rng):
    b = crandn(rng, 10, 2)
    _, rep = solve("gl-bicg", SparseMatrix.identity(10), b, SolveConfig(record_history=False))
    assert rep.history == []


def test_diverged_classification():
    p = gen_advection_3d(GridSpec3D(6, 1000.0))
    _, rep = solve("li-bicg", p.a, p.b, SolveConfig(maxit=5))
    assert rep.status == DIVERGED and rep.final_relative_residual > 1


def test_shadow_choices(rng):
    n, s = 20, 2
    a = SparseMatrix.from_dense(3 * np.eye(n) + crandn(rng, n, n) / np.sqrt(2 * n))
    b = crandn(rng, n, s)
    for choice in ("r0", "conj_r0", crandn(rng, n, s)):
        assert solve("bl-bicg", a, b, SolveConfig(shadow=choice))[1].converged
    assert solve("egl-bicg", a, b, SolveConfig(shadow=crandn(rng, n)))[1].converged
    with pytest.raises(ValueError):
        solve("gl-bicg", a, b, SolveConfig(shadow="mean_r0"))
    with pytest.raises(ValueError):
        solve("gl-bicg", a, b, SolveConfig(shadow="bogus"))
    with pytest.raises(ValueError):
        solve("egl-qmr", a, b, SolveConfig(shadow=crandn(rng, n, s)))


def test_breakdown_is_reported(rng):
    n = 6
    a = SparseMatrix.from_dense(np.diag(np.arange(1.0, n + 1)))
    b = np.zeros((n, 1))
    b[:2] = 1
    shadow = np.zeros((n, 1))
    shadow[4] = 1  # orthogonal to every Krylov vector of b
    _, rep = solve("gl-bicg", a, b, SolveConfig(shadow=shadow))
    assert rep.status in (BREAKDOWN, DIVERGED) and rep.breakdowns
    _, rep = solve("bl-bicg", a, np.column_stack([b, b[::-1]]),
                   SolveConfig(shadow=np.column_stack([shadow, shadow])))
    assert rep.status != CONVERGED and rep.breakdowns
