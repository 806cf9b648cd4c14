"""Helpers for recording solver trajectories in tests."""
import numpy as np

from krylov_mrhs.linalg import SparseMatrix
from krylov_mrhs.solvers import SolveConfig, solve


def run_traj(method, a, b, tol=1e-10, maxit=200, keep=("x",), **cfg):
    """Run ``method`` and return (x, report, records).

    ``records`` holds one dict per callback with copies of the requested
    workspace fields; ``k`` is always included.
    """
    recs = []

    def cb(ws):
        rec = {"k": ws.k}
        for name in keep:
            val = getattr(ws, name)
            rec[name] = val.copy() if isinstance(val, np.ndarray) else val
        recs.append(rec)

    op = a if not isinstance(a, np.ndarray) else SparseMatrix.from_dense(a)
    x, rep = solve(method, op, b, SolveConfig(tol=tol, maxit=maxit, **cfg), callback=cb)
    return x, rep, recs


def iterates(recs):
    """x for k >= 1."""
    return [r["x"] for r in recs if r["k"] > 0]


def max_rel_diff(xs, ys, scale):
    m = min(len(xs), len(ys))
    assert m > 0
    return max(np.linalg.norm(xs[i] - ys[i]) for i in range(m)) / scale
