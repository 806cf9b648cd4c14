"""Matrix Market coordinate-format reader and writer."""
from __future__ import annotations

import gzip
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .exceptions import ParseError, UnsupportedField
from .linalg import SparseMatrix, as_sparse

FIELDS = ("real", "complex", "integer", "pattern")
SYMMETRIES = ("general", "symmetric", "skew-symmetric", "hermitian")


def _open(path, mode):
    path = Path(path)
    if path.suffix == ".gz":
        return gzip.open(path, mode + "t", encoding="ascii")
    return open(path, mode, encoding="ascii")


def load_matrix_market(path):
    """Read a coordinate Matrix Market file into a :class:`SparseMatrix`.

    Symmetric, skew-symmetric and Hermitian storage is expanded; duplicate
    entries are summed.
    """
    try:
        fh = _open(path, "r")
    except OSError as exc:
        raise ParseError(0, f"cannot open file ({exc.strerror})", path=str(path)) from exc
    with fh:
        lines = iter(enumerate(fh, start=1))
        try:
            lineno, header = next(lines)
        except StopIteration:
            raise ParseError(1, "empty file", path=str(path)) from None
        tokens = header.strip().lower().split()
        if len(tokens) != 5 or tokens[0] != "%%matrixmarket" or tokens[1] != "matrix":
            raise ParseError(lineno, "missing '%%MatrixMarket matrix' banner", path=str(path))
        fmt, field, symmetry = tokens[2:]
        if fmt != "coordinate":
            raise UnsupportedField(f"format {fmt!r} (only 'coordinate' is supported)")
        if field not in FIELDS:
            raise UnsupportedField(f"field {field!r}")
        if symmetry not in SYMMETRIES:
            raise UnsupportedField(f"symmetry {symmetry!r}")
        if field == "pattern" and symmetry in ("skew-symmetric", "hermitian"):
            raise UnsupportedField(f"pattern matrices cannot be {symmetry}")

        size = None
        for lineno, line in lines:
            text = line.strip()
            if not text or text.startswith("%"):
                continue
            parts = text.split()
            if len(parts) != 3:
                raise ParseError(lineno, "size line must hold 'rows cols entries'", path=str(path))
            try:
                size = tuple(int(p) for p in parts)
            except ValueError:
                raise ParseError(lineno, "non-integer size entry", path=str(path)) from None
            break
        if size is None:
            raise ParseError(lineno, "missing size line", path=str(path))
        n_rows, n_cols, nnz = size
        if min(size) < 0:
            raise ParseError(lineno, "negative size", path=str(path))
        width = {"pattern": 2, "real": 3, "integer": 3, "complex": 4}[field]
        rows = np.empty(nnz, dtype=np.int64)
        cols = np.empty(nnz, dtype=np.int64)
        vals = np.empty(nnz, dtype=np.complex128)
        k = 0
        for lineno, line in lines:
            text = line.strip()
            if not text or text.startswith("%"):
                continue
            if k >= nnz:
                raise ParseError(lineno, f"more than the declared {nnz} entries", path=str(path))
            parts = text.split()
            if len(parts) != width:
                raise ParseError(lineno, f"expected {width} fields for a {field} entry", path=str(path))
            try:
                i, j = int(parts[0]), int(parts[1])
                if field == "pattern":
                    val = 1.0
                elif field == "complex":
                    val = complex(float(parts[2]), float(parts[3]))
                else:
                    val = float(parts[2])
            except ValueError:
                raise ParseError(lineno, "malformed number", path=str(path)) from None
            if not (1 <= i <= n_rows and 1 <= j <= n_cols):
                raise ParseError(lineno, f"index ({i}, {j}) outside {n_rows}x{n_cols}", path=str(path))
            if symmetry != "general" and j > i:
                raise ParseError(lineno, "entry above the diagonal in symmetric storage", path=str(path))
            if symmetry == "skew-symmetric" and i == j:
                raise ParseError(lineno, "diagonal entry in skew-symmetric storage", path=str(path))
            rows[k], cols[k], vals[k] = i - 1, j - 1, val
            k += 1
        if k != nnz:
            raise ParseError(lineno if nnz else 0, f"found {k} entries, header declares {nnz}", path=str(path))

    if symmetry != "general":
        off = rows != cols
        mirror = vals[off]
        if symmetry == "skew-symmetric":
            mirror = -mirror
        elif symmetry == "hermitian":
            mirror = mirror.conj()
        rows, cols, vals = (np.concatenate([rows, cols[off]]),
                            np.concatenate([cols, rows[off]]),
                            np.concatenate([vals, mirror]))
    m = sp.coo_array((vals, (rows, cols)), shape=(n_rows, n_cols)).tocsr()
    return SparseMatrix.from_scipy(m)


def save_matrix_market(a, path, comment=None):
    """Write ``a`` in coordinate/general form with 17 significant digits.

    The field is ``real`` when every entry has zero imaginary part,
    ``complex`` otherwise.
    """
    a = as_sparse(a)
    coo = a.csr.tocoo()
    order = np.lexsort((coo.col, coo.row))
    r, c, v = coo.row[order], coo.col[order], coo.data[order]
    is_real = not np.any(v.imag)
    field = "real" if is_real else "complex"
    with _open(path, "w") as fh:
        fh.write(f"%%MatrixMarket matrix coordinate {field} general\n")
        if comment:
            for line in str(comment).splitlines():
                fh.write(f"% {line}\n")
        fh.write(f"{a.n_rows} {a.n_cols} {v.size}\n")
        if is_real:
            for i, j, x in zip(r, c, v):
                fh.write(f"{i + 1} {j + 1} {x.real:.17g}\n")
        else:
            for i, j, x in zip(r, c, v):
                fh.write(f"{i + 1} {j + 1} {x.real:.17g} {x.imag:.17g}\n")
