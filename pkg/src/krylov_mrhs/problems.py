"""Test problem generators, right-hand side builders and the rho ratio."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .exceptions import DimensionError
from .linalg import SparseMatrix, as_block, as_sparse, thin_qr
from .precond import PreconditionedOperator

EX5_SHIFT = -0.0919 + 0.0848j


class RankDeficiencyWarning(UserWarning):
    """Raised (as a warning) when a right-hand side block loses rank in QR."""


@dataclass(frozen=True)
class GridSpec2D:
    m: int = 200
    a1: float = 5.0
    a2: float = 5.0
    a3: float = 5.0

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 2:
            raise ValueError(f"m must be an integer >= 2, got {self.m!r}")

    @property
    def h(self):
        return 1.0 / (self.m + 1)


@dataclass(frozen=True)
class GridSpec3D:
    m: int = 50
    nu: float = 1000.0

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 2:
            raise ValueError(f"m must be an integer >= 2, got {self.m!r}")

    @property
    def h(self):
        return 1.0 / (self.m + 1)


@dataclass
class ProblemBundle:
    a: SparseMatrix
    b: np.ndarray
    label: str
    meta: dict = field(default_factory=dict)
    shift: complex = 0.0

    def __post_init__(self):
        self.b = as_block(self.b)
        if self.b.shape[0] != self.a.n_rows:
            raise DimensionError(f"rhs has {self.b.shape[0]} rows, matrix {self.a.n_rows}")

    @property
    def n(self):
        return self.a.n_rows

    @property
    def s(self):
        return self.b.shape[1]

    def operator(self, factors=None):
        return PreconditionedOperator(self.a, factors=factors, shift=self.shift)


def compute_rho(a, s, factors=None):
    """s*n/nnz; with ILU factors the nnz of L and U is added to that of A."""
    a = as_sparse(a)
    nnz = a.nnz + (factors.nnz if factors is not None else 0)
    if nnz <= 0:
        raise ValueError("matrix has no nonzeros")
    return s * a.n_rows / nnz


def _bundle(a, b, label, params):
    a = SparseMatrix.from_scipy(a)
    b = as_block(b)
    meta = dict(n=a.n_rows, s=b.shape[1], nnz=a.nnz,
                rho=compute_rho(a, b.shape[1]), **params)
    return ProblemBundle(a=a, b=b, label=label, meta=meta)


def _stencil(shape, offsets):
    """Assemble a constant-coefficient stencil on a lexicographic grid.

    ``shape`` lists grid extents fastest axis first; ``offsets`` maps a
    unit-offset tuple to its coefficient.  Neighbours outside the grid are
    dropped (Dirichlet elimination).
    """
    n = int(np.prod(shape))
    idx = np.arange(n)
    coords = np.unravel_index(idx, shape[::-1])[::-1]  # fastest axis first
    strides = np.cumprod((1,) + tuple(shape[:-1]))
    rows, cols, vals = [], [], []
    for off, coef in offsets.items():
        mask = np.ones(n, dtype=bool)
        shift = 0
        for ax, d in enumerate(off):
            if d:
                c = coords[ax] + d
                mask &= (c >= 0) & (c < shape[ax])
                shift += d * strides[ax]
        rows.append(idx[mask])
        cols.append(idx[mask] + shift)
        vals.append(np.full(mask.sum(), coef, dtype=np.complex128))
    a = sp.coo_array((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                     shape=(n, n)).tocsr()
    a.sort_indices()
    return a, coords


def gen_conv_diff_2d(g: GridSpec2D = GridSpec2D()) -> ProblemBundle:
    """Central differences for -u_xx - u_yy + 2a1 u_x + 2a2 u_y - 2a3 u = 0.

    Unknown (i, j) at (x, y) = ((i+1)h, (j+1)h) has index i + m*j.  Column c
    of the right-hand side carries the boundary data that is bilinear along
    each edge, equal to one at corner c and zero at the others; corners are
    ordered (0,0), (1,0), (0,1), (1,1).
    """
    m, h = g.m, g.h
    inv_h2 = 1.0 / h**2
    east, west = -inv_h2 + g.a1 / h, -inv_h2 - g.a1 / h
    north, south = -inv_h2 + g.a2 / h, -inv_h2 - g.a2 / h
    a, (ci, cj) = _stencil((m, m), {
        (0, 0): 4 * inv_h2 - 2 * g.a3,
        (1, 0): east, (-1, 0): west, (0, 1): north, (0, -1): south,
    })
    x, y = (ci + 1) * h, (cj + 1) * h
    corners = [(0, 0), (1, 0), (0, 1), (1, 1)]
    b = np.zeros((m * m, 4), dtype=np.complex128)
    for c, (cx, cy) in enumerate(corners):
        def g_c(px, py, cx=cx, cy=cy):
            fx = px if cx else 1 - px
            fy = py if cy else 1 - py
            return fx * fy
        col = b[:, c]
        lo, hi = ci == 0, ci == m - 1
        col[lo] -= west * g_c(0.0, y[lo])
        col[hi] -= east * g_c(1.0, y[hi])
        lo, hi = cj == 0, cj == m - 1
        col[lo] -= south * g_c(x[lo], 0.0)
        col[hi] -= north * g_c(x[hi], 1.0)
    return _bundle(a, b, f"ex1-m{m}",
                   dict(generator="gen2d", m=m, a1=g.a1, a2=g.a2, a3=g.a3))


def exact_solution_3d(m):
    """Grid samples of exp(xyz) sin(pi x) sin(pi y) sin(pi z), lexicographic."""
    t = np.arange(1, m + 1) / (m + 1)
    z, y, x = np.meshgrid(t, t, t, indexing="ij")
    u = np.exp(x * y * z) * np.sin(np.pi * x) * np.sin(np.pi * y) * np.sin(np.pi * z)
    return u.ravel().astype(np.complex128)


def gen_advection_3d(g: GridSpec3D = GridSpec3D()) -> ProblemBundle:
    """Central differences for u_xx + u_yy + u_zz + nu u_x = f on the unit cube.

    Column 0 is A times the samples of the smooth exact solution.  Columns
    1..18 carry Dirichlet data with f = 0: per face (x=0, x=1, y=0, y=1,
    z=0, z=1) the two tangential coordinates followed by the constant 1.
    """
    m, h = g.m, g.h
    inv_h2 = 1.0 / h**2
    east, west = inv_h2 + g.nu / (2 * h), inv_h2 - g.nu / (2 * h)
    a, (ci, cj, ck) = _stencil((m, m, m), {
        (0, 0, 0): -6 * inv_h2,
        (1, 0, 0): east, (-1, 0, 0): west,
        (0, 1, 0): inv_h2, (0, -1, 0): inv_h2,
        (0, 0, 1): inv_h2, (0, 0, -1): inv_h2,
    })
    n = m**3
    pos = [(ci + 1) * h, (cj + 1) * h, (ck + 1) * h]
    u = exact_solution_3d(m)
    cols = [a @ u]
    coef = {(0, 0): west, (0, 1): east, (1, 0): inv_h2, (1, 1): inv_h2,
            (2, 0): inv_h2, (2, 1): inv_h2}
    idx = (ci, cj, ck)
    for ax in range(3):
        tangential = [t for t in range(3) if t != ax]
        for side in (0, 1):
            touch = idx[ax] == (m - 1 if side else 0)
            for func in (pos[tangential[0]], pos[tangential[1]], np.ones(n)):
                col = np.zeros(n, dtype=np.complex128)
                col[touch] = -coef[(ax, side)] * func[touch]
                cols.append(col)
    b = np.column_stack(cols)
    return _bundle(a, b, f"ex2-m{m}-nu{g.nu:g}", dict(generator="gen3d", m=m, nu=g.nu))


def gen_honeycomb(nx, ny, disorder=1.0, seed=0):
    """Periodic honeycomb tight-binding surrogate: 3 hoppings plus on-site term.

    Every row holds exactly four nonzeros, so nnz = 4n.  Intended only as a
    structural stand-in for user-supplied graphene Hamiltonians.
    """
    if nx < 2 or ny < 2:
        raise ValueError("nx and ny must be >= 2")
    rng = np.random.default_rng(seed)
    n = 2 * nx * ny
    cell = np.arange(nx * ny).reshape(ny, nx)
    a_site, b_site = 2 * cell, 2 * cell + 1
    right = np.roll(b_site, 1, axis=1)  # B site of the cell to the left
    down = np.roll(b_site, 1, axis=0)
    src = np.concatenate([a_site.ravel()] * 3)
    dst = np.concatenate([b_site.ravel(), right.ravel(), down.ravel()])
    hop = -np.ones(src.size)
    rows = np.concatenate([src, dst, np.arange(n)])
    cols = np.concatenate([dst, src, np.arange(n)])
    vals = np.concatenate([hop, hop, disorder * rng.uniform(-0.5, 0.5, n)]).astype(np.complex128)
    a = sp.coo_array((vals, (rows, cols)), shape=(n, n)).tocsr()
    a.sort_indices()
    return SparseMatrix.from_scipy(a)


def unit_vector_rhs(n, count):
    if count > n:
        raise DimensionError(f"cannot take {count} unit vectors in dimension {n}")
    b = np.zeros((n, count), dtype=np.complex128, order="F")
    b[np.arange(count), np.arange(count)] = 1.0
    return b


def random_rhs(n, s, seed=0):
    """Complex block with independent standard normal real and imaginary parts."""
    rng = np.random.default_rng(seed)
    b = rng.standard_normal((n, s)) + 1j * rng.standard_normal((n, s))
    return np.asfortranarray(b)


def shifted_problem(a, t=EX5_SHIFT, b=None, label="shifted"):
    """Bundle for (A - t I) X = B; rho is taken from the nnz of A."""
    a = as_sparse(a)
    if a.n_rows != a.n_cols:
        raise DimensionError("shifted problems need a square matrix")
    if b is None:
        raise DimensionError("a right-hand side block is required")
    b = as_block(b)
    if b.shape[0] != a.n_rows:
        raise DimensionError(f"rhs has {b.shape[0]} rows, matrix {a.n_rows}")
    meta = dict(n=a.n_rows, s=b.shape[1], nnz=a.nnz, rho=compute_rho(a, b.shape[1]),
                generator="shifted", shift=complex(t))
    return ProblemBundle(a=a, b=b, label=label, meta=meta, shift=complex(t))


def preprocess_rhs(b, return_factor=False):
    """Replace ``b`` by the orthonormal factor of its thin QR.

    Emits :class:`RankDeficiencyWarning` if a column was deflated.  With
    ``return_factor`` the full :class:`ThinQRResult` is returned instead.
    """
    b = as_block(b)
    if b.shape[0] < b.shape[1]:
        raise DimensionError("need n >= s to orthonormalize the right-hand sides")
    res = thin_qr(b)
    if res.rank_deficient:
        warnings.warn(f"right-hand side block has numerical rank {res.rank_estimate} < {b.shape[1]}",
                      RankDeficiencyWarning, stacklevel=2)
    return res if return_factor else res.q
