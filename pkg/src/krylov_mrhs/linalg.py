"""Sparse and small dense kernels shared by all simultaneous solvers.

Block vectors are plain complex ``numpy`` arrays of shape ``(n, s)`` in
Fortran (column-major) order, so column ``i`` (the i-th right-hand side) is a
contiguous slice.  Small coefficient matrices are ``(s, s)`` arrays.  Every
kernel accepts an optional :class:`~krylov_mrhs.instrumentation.CounterSet`
and charges it according to the vector-operation convention.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .exceptions import DimensionError, SingularSmallMatrix
from .instrumentation import count

EPS_DEFL = 1e-12
EPS_BRK = 1e-14


class SparseMatrix:
    """Complex CSR matrix with sorted, duplicate-free column indices per row.

    Storage and products are delegated to :mod:`scipy.sparse`; this class
    pins the invariants and caches the conjugate transpose.
    """

    def __init__(self, row_ptr, col_idx, values, shape):
        n_rows, n_cols = shape
        row_ptr = np.asarray(row_ptr, dtype=np.int64)
        col_idx = np.asarray(col_idx, dtype=np.int64)
        values = np.asarray(values, dtype=np.complex128)
        if row_ptr.shape != (n_rows + 1,):
            raise DimensionError(f"row_ptr must have length {n_rows + 1}")
        if row_ptr[0] != 0 or np.any(np.diff(row_ptr) < 0):
            raise ValueError("row_ptr must start at 0 and be nondecreasing")
        if row_ptr[-1] != col_idx.size or col_idx.size != values.size:
            raise ValueError("row_ptr[-1], len(col_idx) and len(values) disagree")
        if col_idx.size and (col_idx.min() < 0 or col_idx.max() >= n_cols):
            raise ValueError("column index out of range")
        if not np.all(np.isfinite(values)):
            raise ValueError("matrix entries must be finite")
        # strictly increasing columns inside each row
        if col_idx.size > 1:
            starts = np.zeros(col_idx.size + 1, dtype=bool)
            starts[row_ptr] = True
            if np.any((np.diff(col_idx) <= 0) & ~starts[1:-1]):
                raise ValueError("column indices must be strictly increasing within each row")
        self.n_rows = int(n_rows)
        self.n_cols = int(n_cols)
        self.csr = sp.csr_array((values, col_idx, row_ptr), shape=(n_rows, n_cols))

    @classmethod
    def from_scipy(cls, m):
        m = sp.csr_array(m, dtype=np.complex128)
        m.sum_duplicates()
        m.sort_indices()
        return cls(m.indptr, m.indices, m.data, m.shape)

    @classmethod
    def from_dense(cls, d):
        return cls.from_scipy(sp.csr_array(np.asarray(d, dtype=np.complex128)))

    @classmethod
    def identity(cls, n):
        return cls.from_scipy(sp.identity(n, dtype=np.complex128, format="csr"))

    @property
    def shape(self):
        return (self.n_rows, self.n_cols)

    @property
    def row_ptr(self):
        return self.csr.indptr

    @property
    def col_idx(self):
        return self.csr.indices

    @property
    def values(self):
        return self.csr.data

    @property
    def nnz(self):
        return int(self.csr.indptr[-1])

    @cached_property
    def csr_adjoint(self):
        return sp.csr_array(self.csr.conj().T)

    def diagonal(self):
        return self.csr.diagonal()

    def to_dense(self):
        return self.csr.toarray()

    def frob_norm(self):
        return float(np.linalg.norm(self.csr.data))

    def __repr__(self):
        return f"SparseMatrix({self.n_rows}x{self.n_cols}, nnz={self.nnz})"


def as_sparse(a):
    if isinstance(a, SparseMatrix):
        return a
    if sp.issparse(a):
        return SparseMatrix.from_scipy(a)
    return SparseMatrix.from_dense(a)


def as_block(b):
    """Copy ``b`` into a column-major complex ``(n, s)`` block vector."""
    b = np.asarray(b, dtype=np.complex128)
    if b.ndim == 1:
        b = b[:, None]
    if b.ndim != 2:
        raise DimensionError("block vector must be 1-D or 2-D")
    return np.array(b, order="F", copy=True)


def spmv(a, v, adjoint=False):
    v = np.asarray(v)
    expected = a.n_rows if adjoint else a.n_cols
    if v.ndim != 1 or v.shape[0] != expected:
        raise DimensionError(f"vector of length {expected} expected, got shape {v.shape}")
    m = a.csr_adjoint if adjoint else a.csr
    return m @ v


def spmm(a, v, adjoint=False):
    """Sparse matrix times block vector; column j equals ``spmv`` of column j."""
    v = np.asarray(v)
    expected = a.n_rows if adjoint else a.n_cols
    if v.ndim != 2 or v.shape[0] != expected:
        raise DimensionError(f"block with {expected} rows expected, got shape {v.shape}")
    m = a.csr_adjoint if adjoint else a.csr
    return np.asfortranarray(m @ v)


def _same_shape(x, y):
    if x.shape != y.shape:
        raise DimensionError(f"shape mismatch {x.shape} vs {y.shape}")


def trace_inner(x, y, counters=None):
    """Global inner product tr(y^H x)."""
    _same_shape(x, y)
    count(counters, vector_ops=x.shape[1] if x.ndim == 2 else 1)
    return complex(np.vdot(y, x))


def col_inner(x, y, counters=None):
    """Columnwise inner products y_i^H x_i as an s-vector."""
    _same_shape(x, y)
    count(counters, vector_ops=x.shape[1])
    return np.einsum("ij,ij->j", y.conj(), x)


def sum_inner(r_hat, r, counters=None):
    """sum(r_hat^H R), i.e. tr(y^H R) for the rank-one block y = r_hat 1^T."""
    r_hat = np.asarray(r_hat)
    if r_hat.ndim != 1 or r.ndim != 2 or r_hat.shape[0] != r.shape[0]:
        raise DimensionError(f"cannot pair vector {r_hat.shape} with block {r.shape}")
    count(counters, vector_ops=r.shape[1])
    return complex(np.sum(r_hat.conj() @ r))


def block_gram(x, y, counters=None):
    """y^H x, of shape (y.s, x.s)."""
    if x.ndim != 2 or y.ndim != 2 or x.shape[0] != y.shape[0]:
        raise DimensionError(f"shape mismatch {x.shape} vs {y.shape}")
    count(counters, vector_ops=x.shape[1] * y.shape[1])
    return y.conj().T @ x


def block_axpy(y, x, coeff, sign=1, counters=None):
    """Return ``y + sign * x @ coeff``.

    ``coeff`` may be a scalar (global variants), a length-s vector applied
    columnwise (loop-interchanged variants) or a full matrix (block variants).
    """
    if x.ndim != 2 or y.ndim != 2 or x.shape[0] != y.shape[0]:
        raise DimensionError(f"shape mismatch {x.shape} vs {y.shape}")
    c = np.asarray(coeff)
    if c.ndim == 0:
        _same_shape(x, y)
        count(counters, vector_ops=x.shape[1])
        upd = x * c
    elif c.ndim == 1:
        _same_shape(x, y)
        if c.shape[0] != x.shape[1]:
            raise DimensionError("diagonal coefficient length must equal the block width")
        count(counters, vector_ops=x.shape[1])
        upd = x * c[None, :]
    elif c.ndim == 2:
        if c.shape != (x.shape[1], y.shape[1]):
            raise DimensionError(f"coefficient shape {c.shape} does not map {x.shape} onto {y.shape}")
        count(counters, vector_ops=c.shape[0] * c.shape[1])
        upd = x @ c
    else:
        raise DimensionError("coefficient must be scalar, vector or matrix")
    out = y + upd if sign > 0 else y - upd
    return np.asfortranarray(out)


def frob_norm(x):
    return float(np.linalg.norm(x))


def col_norms(x):
    return np.linalg.norm(x, axis=0)


@dataclass
class ThinQRResult:
    q: np.ndarray
    c: np.ndarray
    rank_estimate: int
    min_diag: float

    @property
    def rank_deficient(self):
        return self.rank_estimate < self.c.shape[0]


def _fill_direction(q, j, n):
    # deterministic replacement direction for a deflated column
    rng = np.random.default_rng(7919 + 104729 * j + n)
    z = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    for _ in range(2):
        z -= q[:, :j] @ (q[:, :j].conj().T @ z)
    return z / np.linalg.norm(z)


def thin_qr(v, eps_defl=EPS_DEFL, counters=None):
    """Thin QR by modified Gram-Schmidt with one reorthogonalization pass.

    Diagonal entries of ``c`` are real and nonnegative.  Columns whose
    remaining norm falls below ``eps_defl * ||v||_F`` are deflated: ``c_jj``
    is set to zero and ``q_j`` becomes a random unit vector orthogonal to the
    previous columns, so ``q`` always has orthonormal columns and
    ``q @ c`` still reproduces ``v``.
    """
    v = np.asarray(v, dtype=np.complex128)
    if v.ndim != 2:
        raise DimensionError("thin_qr expects a 2-D block")
    n, s = v.shape
    if n < s:
        raise DimensionError(f"thin_qr needs n >= s, got {v.shape}")
    q = np.array(v, order="F", copy=True)
    c = np.zeros((s, s), dtype=np.complex128)
    scale = np.linalg.norm(v)
    rank = 0
    for j in range(s):
        w = q[:, j]
        for _ in range(2):
            for i in range(j):
                h = np.vdot(q[:, i], w)
                w -= h * q[:, i]
                c[i, j] += h
        nrm = np.linalg.norm(w)
        if nrm > eps_defl * scale:
            q[:, j] = w / nrm
            c[j, j] = nrm
            rank += 1
        else:
            q[:, j] = _fill_direction(q, j, n)
            c[j, j] = 0.0
    count(counters, vector_ops=2 * s * s, qr=1)
    min_diag = float(np.min(np.abs(np.diag(c)))) if s else 0.0
    return ThinQRResult(q=q, c=c, rank_estimate=rank, min_diag=min_diag)


class SmallLU:
    """LU factorization (partial pivoting) of a small square matrix.

    Raises :class:`SingularSmallMatrix` when a pivot is below
    ``eps_brk * ||m||_F``.  Solves with ``m`` or ``m^H`` reuse the factors.
    """

    def __init__(self, m, eps_brk=EPS_BRK):
        m = np.asarray(m, dtype=np.complex128)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError(f"square matrix expected, got {m.shape}")
        self.m = m
        scale = np.linalg.norm(m)
        if not np.all(np.isfinite(m)):
            raise SingularSmallMatrix(float("nan"), scale)
        with warnings.catch_warnings():
            # exact zero pivots are reported below as SingularSmallMatrix
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            self.lu, self.piv = scipy.linalg.lu_factor(m, check_finite=False)
        pivots = np.abs(np.diag(self.lu))
        smallest = float(pivots.min()) if pivots.size else 0.0
        if smallest < eps_brk * scale or scale == 0.0:
            raise SingularSmallMatrix(smallest, scale)

    def solve(self, rhs, adjoint=False, counters=None):
        count(counters, small_solves=1)
        return scipy.linalg.lu_solve((self.lu, self.piv), rhs, trans=2 if adjoint else 0,
                                     check_finite=False)

    def cond(self):
        return float(np.linalg.cond(self.m))


def small_solve(m, rhs, eps_brk=EPS_BRK, counters=None, return_cond=False):
    """Solve ``m z = rhs`` for small dense ``m``; optionally also return cond(m)."""
    f = SmallLU(m, eps_brk)
    rhs = np.asarray(rhs, dtype=np.complex128)
    if rhs.shape[0] != f.m.shape[0]:
        raise DimensionError(f"rhs with {f.m.shape[0]} rows expected, got {rhs.shape}")
    z = f.solve(rhs, counters=counters)
    if return_cond:
        return z, f.cond()
    return z
