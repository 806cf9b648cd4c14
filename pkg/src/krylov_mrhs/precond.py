"""Incomplete LU factorizations and the right-preconditioned operator.

The factorization and triangular-solve loops are compiled with numba.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .exceptions import DimensionError, ZeroPivot
from .linalg import EPS_BRK, SparseMatrix, as_sparse, spmm


@dataclass(frozen=True)
class ILUFactors:
    l: SparseMatrix  # unit lower triangular, unit diagonal stored
    u: SparseMatrix  # upper triangular
    kind: str  # "ilu0" or "ilut"
    droptol: float | None = None

    @property
    def nnz(self):
        return self.l.nnz + self.u.nnz

    def solve(self, y):
        """(LU)^{-1} y for a block y."""
        return solve_upper(self.u, solve_unit_lower(self.l, y))

    def solve_adjoint(self, y):
        """(LU)^{-H} y = L^{-H} U^{-H} y."""
        return solve_unit_lower_adjoint(self.l, solve_upper_adjoint(self.u, y))


# ---------------------------------------------------------------- kernels

@numba.njit(cache=True)
def _ilu0_kernel(indptr, indices, vals, diag_pos, tiny):
    n = indptr.size - 1
    pos = -np.ones(n, dtype=np.int64)
    for i in range(n):
        for p in range(indptr[i], indptr[i + 1]):
            pos[indices[p]] = p
        for p in range(indptr[i], indptr[i + 1]):
            k = indices[p]
            if k >= i:
                break
            vals[p] = vals[p] / vals[diag_pos[k]]
            lik = vals[p]
            for q in range(diag_pos[k] + 1, indptr[k + 1]):
                jj = pos[indices[q]]
                if jj >= 0:
                    vals[jj] -= lik * vals[q]
        for p in range(indptr[i], indptr[i + 1]):
            pos[indices[p]] = -1
        if abs(vals[diag_pos[i]]) < tiny:
            return i
    return -1


@numba.njit(cache=True)
def _grow(arr, need):
    if need <= arr.size:
        return arr
    cap = max(need, 2 * arr.size)
    out = np.empty(cap, dtype=arr.dtype)
    out[:arr.size] = arr
    return out


@numba.njit(cache=True)
def _ilut_kernel(indptr, indices, vals, droptol, tiny):
    n = indptr.size - 1
    w = np.zeros(n, dtype=np.complex128)
    marked = np.zeros(n, dtype=np.bool_)
    nzlist = np.empty(n, dtype=np.int64)

    cap = 2 * vals.size + n
    l_ptr = np.zeros(n + 1, dtype=np.int64)
    l_idx = np.empty(cap, dtype=np.int64)
    l_val = np.empty(cap, dtype=np.complex128)
    u_ptr = np.zeros(n + 1, dtype=np.int64)
    u_idx = np.empty(cap, dtype=np.int64)
    u_val = np.empty(cap, dtype=np.complex128)
    u_diag = np.empty(n, dtype=np.int64)
    nl = 0
    nu = 0
    for i in range(n):
        nnz_row = 0
        rownorm = 0.0
        aii = 0.0 + 0.0j
        for p in range(indptr[i], indptr[i + 1]):
            j = indices[p]
            w[j] = vals[p]
            marked[j] = True
            nzlist[nnz_row] = j
            nnz_row += 1
            rownorm += abs(vals[p]) ** 2
            if j == i:
                aii = vals[p]
        if not marked[i]:
            w[i] = 0.0
            marked[i] = True
            nzlist[nnz_row] = i
            nnz_row += 1
        tau = droptol * np.sqrt(rownorm)

        # eliminate lower entries in increasing column order
        done_k = -1
        while True:
            k = n
            for t in range(nnz_row):
                j = nzlist[t]
                if j < i and j > done_k and j < k:
                    k = j
            if k == n:
                break
            done_k = k
            wk = w[k] / u_val[u_diag[k]]
            if abs(wk) < tau:
                w[k] = 0.0
                continue
            w[k] = wk
            for q in range(u_diag[k] + 1, u_ptr[k + 1]):
                j = u_idx[q]
                if not marked[j]:
                    marked[j] = True
                    w[j] = 0.0
                    nzlist[nnz_row] = j
                    nnz_row += 1
                w[j] -= wk * u_val[q]

        # sort the surviving pattern of the row
        cols = np.sort(nzlist[:nnz_row])
        l_idx = _grow(l_idx, nl + nnz_row + 1)
        l_val = _grow(l_val, nl + nnz_row + 1)
        u_idx = _grow(u_idx, nu + nnz_row)
        u_val = _grow(u_val, nu + nnz_row)
        for t in range(cols.size):
            j = cols[t]
            if j < i and w[j] != 0.0:
                l_idx[nl] = j
                l_val[nl] = w[j]
                nl += 1
        l_idx[nl] = i
        l_val[nl] = 1.0
        nl += 1
        l_ptr[i + 1] = nl
        for t in range(cols.size):
            j = cols[t]
            if j == i:
                piv = w[i]
                if abs(piv) < tiny:
                    if tau == 0.0:
                        return -i - 2, l_ptr, l_idx, l_val, u_ptr, u_idx, u_val
                    phase = aii / abs(aii) if aii != 0.0 else 1.0 + 0.0j
                    piv = tau * phase
                u_diag[i] = nu
                u_idx[nu] = i
                u_val[nu] = piv
                nu += 1
            elif j > i and abs(w[j]) >= tau and w[j] != 0.0:
                u_idx[nu] = j
                u_val[nu] = w[j]
                nu += 1
        u_ptr[i + 1] = nu
        for t in range(nnz_row):
            j = nzlist[t]
            w[j] = 0.0
            marked[j] = False
    return -1, l_ptr, l_idx[:nl], l_val[:nl], u_ptr, u_idx[:nu], u_val[:nu]


@numba.njit(cache=True)
def _lower_unit_solve(indptr, indices, vals, b):
    n, s = b.shape
    x = b.copy()
    for c in range(s):
        for i in range(n):
            acc = x[i, c]
            for p in range(indptr[i], indptr[i + 1]):
                j = indices[p]
                if j < i:
                    acc -= vals[p] * x[j, c]
            x[i, c] = acc
    return x


@numba.njit(cache=True)
def _upper_solve(indptr, indices, vals, b):
    n, s = b.shape
    x = b.copy()
    for c in range(s):
        for i in range(n - 1, -1, -1):
            acc = x[i, c]
            d = 0.0 + 0.0j
            for p in range(indptr[i], indptr[i + 1]):
                j = indices[p]
                if j > i:
                    acc -= vals[p] * x[j, c]
                elif j == i:
                    d = vals[p]
            x[i, c] = acc / d
    return x


@numba.njit(cache=True)
def _lower_unit_adjoint_solve(indptr, indices, vals, b):
    # L^H is upper triangular: sweep rows of L backwards, scattering
    n, s = b.shape
    x = b.copy()
    for c in range(s):
        for i in range(n - 1, -1, -1):
            xi = x[i, c]
            for p in range(indptr[i], indptr[i + 1]):
                j = indices[p]
                if j < i:
                    x[j, c] -= np.conj(vals[p]) * xi
    return x


@numba.njit(cache=True)
def _upper_adjoint_solve(indptr, indices, vals, b):
    n, s = b.shape
    x = b.copy()
    for c in range(s):
        for i in range(n):
            d = 0.0 + 0.0j
            for p in range(indptr[i], indptr[i + 1]):
                if indices[p] == i:
                    d = vals[p]
                    break
            xi = x[i, c] / np.conj(d)
            x[i, c] = xi
            for p in range(indptr[i], indptr[i + 1]):
                j = indices[p]
                if j > i:
                    x[j, c] -= np.conj(vals[p]) * xi
    return x


def _as_2d(y):
    y = np.asarray(y, dtype=np.complex128)
    return (y[:, None], True) if y.ndim == 1 else (y, False)


def _tri(kernel, m, y):
    y2, vec = _as_2d(y)
    if y2.shape[0] != m.n_rows:
        raise DimensionError(f"triangular solve: {m.n_rows} rows expected, got {y2.shape}")
    x = kernel(m.row_ptr.astype(np.int64), m.col_idx.astype(np.int64), m.values,
               np.ascontiguousarray(y2))
    x = np.asfortranarray(x)
    return x[:, 0] if vec else x


def solve_unit_lower(l, y):
    return _tri(_lower_unit_solve, l, y)


def solve_upper(u, y):
    return _tri(_upper_solve, u, y)


def solve_unit_lower_adjoint(l, y):
    return _tri(_lower_unit_adjoint_solve, l, y)


def solve_upper_adjoint(u, y):
    return _tri(_upper_adjoint_solve, u, y)


# ---------------------------------------------------------- factorizations

def _split(a, vals):
    """Split factored CSR values (L strictly below, U on/above the diagonal)."""
    n = a.n_rows
    rows = np.repeat(np.arange(n), np.diff(a.row_ptr))
    cols = a.col_idx
    lower = cols < rows
    import scipy.sparse as sp
    lmat = sp.csr_array((vals[lower], (rows[lower], cols[lower])), shape=a.shape)
    lmat = lmat + sp.identity(n, dtype=np.complex128, format="csr")
    upper = ~lower
    umat = sp.csr_array((vals[upper], (rows[upper], cols[upper])), shape=a.shape)
    return SparseMatrix.from_scipy(lmat), SparseMatrix.from_scipy(umat)


def _diag_positions(a):
    n = a.n_rows
    pos = np.full(n, -1, dtype=np.int64)
    rows = np.repeat(np.arange(n), np.diff(a.row_ptr))
    hit = np.nonzero(a.col_idx == rows)[0]
    pos[rows[hit]] = hit
    return pos


def ilu0(a):
    """No-fill incomplete LU on the sparsity pattern of ``a``."""
    a = as_sparse(a)
    if a.n_rows != a.n_cols:
        raise DimensionError("ilu0 needs a square matrix")
    diag_pos = _diag_positions(a)
    missing = np.nonzero(diag_pos < 0)[0]
    if missing.size:
        raise ZeroPivot(int(missing[0]), 0.0)
    vals = a.values.astype(np.complex128).copy()
    tiny = EPS_BRK * a.frob_norm()
    bad = _ilu0_kernel(a.row_ptr.astype(np.int64), a.col_idx.astype(np.int64), vals, diag_pos, tiny)
    if bad >= 0:
        raise ZeroPivot(int(bad), vals[diag_pos[bad]])
    l, u = _split(a, vals)
    return ILUFactors(l=l, u=u, kind="ilu0")


def ilut(a, droptol=5e-2):
    """Threshold ILU (row-wise IKJ elimination, no pivoting).

    Entries below ``droptol`` times the 2-norm of the original row are
    dropped; the diagonal is always kept.  A pivot that underflows is
    replaced by ``droptol * rownorm`` with the phase of the original diagonal.
    """
    a = as_sparse(a)
    if a.n_rows != a.n_cols:
        raise DimensionError("ilut needs a square matrix")
    if droptol < 0:
        raise ValueError("droptol must be nonnegative")
    tiny = EPS_BRK * a.frob_norm()
    flag, lp, li, lv, up, ui, uv = _ilut_kernel(
        a.row_ptr.astype(np.int64), a.col_idx.astype(np.int64),
        a.values.astype(np.complex128), float(droptol), tiny)
    if flag != -1:
        raise ZeroPivot(int(-flag - 2), 0.0)
    n = a.n_rows
    l = SparseMatrix(lp, li, lv, (n, n))
    u = SparseMatrix(up, ui, uv, (n, n))
    return ILUFactors(l=l, u=u, kind="ilut", droptol=float(droptol))


# ---------------------------------------------------------------- operator

class PreconditionedOperator:
    """The operator (A - t I) (LU)^{-1} for right preconditioning.

    Without factors and with ``shift=0`` this is just ``A``.  Each applied
    column is charged once to the counters passed to :meth:`apply`.
    """

    def __init__(self, a, factors=None, shift=0.0):
        self.a = as_sparse(a)
        if self.a.n_rows != self.a.n_cols:
            raise DimensionError("operator must be square")
        self.factors = factors
        self.shift = complex(shift)

    @property
    def n(self):
        return self.a.n_rows

    def apply(self, v, adjoint=False, counters=None):
        v = np.asarray(v)
        vec = v.ndim == 1
        v2 = v[:, None] if vec else v
        if v2.shape[0] != self.n:
            raise DimensionError(f"operator of size {self.n} applied to block {v.shape}")
        if counters is not None:
            if adjoint:
                counters.matvec_cols_AH += v2.shape[1]
            else:
                counters.matvec_cols_A += v2.shape[1]
            counters.block_matvecs += 1
        if adjoint:
            w = spmm(self.a, np.asfortranarray(v2), adjoint=True)
            if self.shift:
                w = w - np.conj(self.shift) * v2
            if self.factors is not None:
                w = self.factors.solve_adjoint(w)
        else:
            w = self.factors.solve(v2) if self.factors is not None else v2
            w2 = spmm(self.a, np.asfortranarray(w))
            if self.shift:
                w2 = w2 - self.shift * w
            w = w2
        w = np.asfortranarray(w)
        return w[:, 0] if vec else w

    def matvec_true(self, x):
        """(A - t I) x without preconditioning and without counting."""
        x = np.asarray(x)
        x2 = x[:, None] if x.ndim == 1 else x
        w = spmm(self.a, np.asfortranarray(x2))
        if self.shift:
            w = w - self.shift * x2
        return w[:, 0] if x.ndim == 1 else w

    def to_dense(self):
        """Dense matrix of the operator (small n only, for testing)."""
        return self.apply(np.eye(self.n, dtype=np.complex128))


def apply(op, v, adjoint=False, counters=None):
    return op.apply(v, adjoint=adjoint, counters=counters)


def recover_solution(op, y):
    """x = (LU)^{-1} y, mapping the right-preconditioned iterate back."""
    if op.factors is None:
        return np.array(y, copy=True)
    return op.factors.solve(y)
