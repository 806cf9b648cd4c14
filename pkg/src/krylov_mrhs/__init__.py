"""Short-recurrence Krylov solvers for sparse systems with many right-hand sides."""
from .instrumentation import CounterSet, expected_vector_ops, measure_block_speedup
from .linalg import SparseMatrix, thin_qr
from .precond import PreconditionedOperator, ilu0, ilut, recover_solution
from .solvers import METHODS, SolveConfig, SolverReport, get_solver, solve

__version__ = "0.1.0"

__all__ = [
    "CounterSet", "expected_vector_ops", "measure_block_speedup",
    "SparseMatrix", "thin_qr",
    "PreconditionedOperator", "ilu0", "ilut", "recover_solution",
    "METHODS", "SolveConfig", "SolverReport", "get_solver", "solve",
]
