"""Registry of the simultaneous solvers, keyed by ``<variant>-<family>``."""
from .bicg import BiCGWorkspace, bl_bicg, bl_bicg_rq, egl_bicg, gl_bicg, li_bicg
from .bicgstab import BiCGStabWorkspace, bl_bicgstab, bl_bicgstab_rq, gl_bicgstab, li_bicgstab
from .common import (BREAKDOWN, CONVERGED, DIVERGED, MAXIT, Breakdown, SolveConfig,
                     SolverReport)
from .qmr import QMRWorkspace, egl_qmr, gl_qmr, li_qmr
from ..exceptions import UnknownMethod

METHODS = {
    "li-bicg": li_bicg,
    "gl-bicg": gl_bicg,
    "egl-bicg": egl_bicg,
    "bl-bicg": bl_bicg,
    "bl-bicg-rq": bl_bicg_rq,
    "li-qmr": li_qmr,
    "gl-qmr": gl_qmr,
    "egl-qmr": egl_qmr,
    "li-bicgstab": li_bicgstab,
    "gl-bicgstab": gl_bicgstab,
    "bl-bicgstab": bl_bicgstab,
    "bl-bicgstab-rq": bl_bicgstab_rq,
}

# combinations that do not exist: no economic BiCGStab (it has no adjoint
# products to save) and no block QMR (needs look-ahead and deflation)
NOT_AVAILABLE = {
    "egl-bicgstab": "there is no economic variant of BiCGStab",
    "bl-qmr": "block QMR is not implemented",
    "bl-qmr-rq": "block QMR is not implemented",
}


def get_solver(name):
    try:
        return METHODS[name]
    except KeyError:
        raise UnknownMethod(name) from None


def solve(method, op, b, cfg=None, callback=None):
    return get_solver(method)(op, b, cfg, callback=callback)


__all__ = [
    "METHODS", "NOT_AVAILABLE", "get_solver", "solve",
    "SolveConfig", "SolverReport", "Breakdown",
    "CONVERGED", "MAXIT", "BREAKDOWN", "DIVERGED",
    "BiCGWorkspace", "BiCGStabWorkspace", "QMRWorkspace",
    "li_bicg", "gl_bicg", "egl_bicg", "bl_bicg", "bl_bicg_rq",
    "li_bicgstab", "gl_bicgstab", "bl_bicgstab", "bl_bicgstab_rq",
    "li_qmr", "gl_qmr", "egl_qmr",
]
