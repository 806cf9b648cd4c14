"""Configuration, reports and shared plumbing for the simultaneous solvers."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..instrumentation import CounterSet
from ..linalg import EPS_BRK, as_block, frob_norm
from ..precond import PreconditionedOperator, recover_solution

CONVERGED = "converged"
MAXIT = "maxit_reached"
BREAKDOWN = "breakdown"
DIVERGED = "diverged"


@dataclass
class SolveConfig:
    """Stopping and start-up parameters shared by every method.

    ``shadow`` selects the initial shadow residual: ``"r0"`` (the default
    for all but the economic variants), ``"conj_r0"``, ``"mean_r0"`` (the
    default for the economic variants) or an explicit array.  For the
    economic variants an explicit array must be a single n-vector.
    """

    tol: float = 1e-10
    maxit: int = 500
    shadow: object = None
    record_history: bool = True
    true_residual_check: bool = True
    eps_brk: float = EPS_BRK

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if int(self.maxit) < 1:
            raise ValueError("maxit must be at least 1")
        self.maxit = int(self.maxit)


@dataclass
class Breakdown:
    kind: str
    iteration: int
    column: int | None = None


@dataclass
class SolverReport:
    method: str
    status: str = MAXIT
    iterations: int = 0
    counters: CounterSet = field(default_factory=CounterSet)
    history: list = field(default_factory=list)
    matvec_history: list = field(default_factory=list)
    estimates: list = field(default_factory=list)
    final_relative_residual: float = float("nan")
    wall_time: float = 0.0
    breakdowns: list = field(default_factory=list)
    half_step_exit: bool = False

    @property
    def matvec_cols_A(self):
        return self.counters.matvec_cols_A

    @property
    def matvec_cols_AH(self):
        return self.counters.matvec_cols_AH

    @property
    def vector_ops(self):
        return self.counters.vector_ops

    @property
    def converged(self):
        return self.status == CONVERGED

    def summary(self):
        return {
            "method": self.method,
            "status": self.status,
            "iterations": self.iterations,
            "matvec_cols_A": self.matvec_cols_A,
            "matvec_cols_AH": self.matvec_cols_AH,
            "vector_ops": self.vector_ops,
            "final_relative_residual": self.final_relative_residual,
            "wall_time": self.wall_time,
            "breakdowns": [b.__dict__ for b in self.breakdowns],
        }


def as_operator(op):
    if isinstance(op, PreconditionedOperator):
        return op
    return PreconditionedOperator(op)


class SolveContext:
    """Per-solve bookkeeping: counters, history, timing and termination."""

    def __init__(self, method, op, b, cfg):
        self.cfg = cfg if cfg is not None else SolveConfig()
        self.op = as_operator(op)
        self.b = as_block(b)
        if self.b.shape[0] != self.op.n:
            from ..exceptions import DimensionError
            raise DimensionError(f"rhs has {self.b.shape[0]} rows, operator is {self.op.n}x{self.op.n}")
        self.report = SolverReport(method=method)
        self.ctr = self.report.counters
        self._t0 = time.perf_counter()
        self.r0_norm = frob_norm(self.b)
        self.threshold = self.cfg.tol * self.r0_norm

    def matvec(self, v, adjoint=False):
        return self.op.apply(v, adjoint=adjoint, counters=self.ctr)

    def record(self, res_norm, estimate=None):
        if self.cfg.record_history:
            rel = res_norm / self.r0_norm if self.r0_norm > 0 else 0.0
            self.report.history.append(float(rel))
            self.report.matvec_history.append(self.ctr.matvec_cols_A + self.ctr.matvec_cols_AH)
            if estimate is not None:
                self.report.estimates.append(float(estimate / self.r0_norm) if self.r0_norm > 0 else 0.0)

    def converged(self, res_norm):
        return res_norm <= self.threshold

    def breakdown(self, kind, iteration, column=None):
        self.report.breakdowns.append(Breakdown(kind, iteration, column))

    def tiny(self, den, *scales):
        """Scale-aware test for a (near) zero Lanczos denominator."""
        ref = 1.0
        for s in scales:
            ref *= s
        return (not np.isfinite(den)) or abs(den) <= self.cfg.eps_brk * ref

    def finish(self, y, status, iterations):
        """Map back to the unpreconditioned solution and classify the run."""
        rep = self.report
        rep.iterations = iterations
        x = recover_solution(self.op, y)
        if self.cfg.true_residual_check:
            with np.errstate(all="ignore"):
                r = self.b - self.op.matvec_true(x)
                rel = frob_norm(r) / self.r0_norm if self.r0_norm > 0 else frob_norm(r)
            rep.final_relative_residual = float(rel) if np.isfinite(rel) else float("inf")
        if status != CONVERGED and not rep.final_relative_residual <= 1.0 \
                and self.cfg.true_residual_check:
            status = DIVERGED
        rep.status = status
        rep.wall_time = time.perf_counter() - self._t0
        return x, rep


def initial_shadow(cfg, r0, economic=False):
    """Initial shadow residual from the configuration."""
    choice = cfg.shadow
    if choice is None:
        choice = "mean_r0" if economic else "r0"
    if isinstance(choice, str):
        if choice == "r0":
            sh = r0.copy()
        elif choice == "conj_r0":
            sh = r0.conj()
        elif choice == "mean_r0":
            if not economic:
                raise ValueError("shadow 'mean_r0' is only defined for the economic variants")
            return np.mean(r0, axis=1)
        else:
            raise ValueError(f"unknown shadow choice {choice!r}")
        if economic:
            if sh.shape[1] != 1:
                raise ValueError("economic variants need a single shadow vector")
            return sh[:, 0].copy()
        return np.asfortranarray(sh)
    sh = np.asarray(choice, dtype=np.complex128)
    if economic:
        if sh.ndim == 2 and sh.shape[1] == 1:
            sh = sh[:, 0]
        if sh.ndim != 1 or sh.shape[0] != r0.shape[0]:
            raise ValueError("economic variants need a single shadow vector of length n")
        return sh.copy()
    sh = as_block(sh)
    if sh.shape != r0.shape:
        raise ValueError(f"shadow block must have shape {r0.shape}")
    return sh


def keep_frozen(frozen, old, new):
    """Columns flagged in ``frozen`` keep their old values."""
    if not frozen.any():
        return new
    return np.asfortranarray(np.where(frozen[None, :], old, new))
