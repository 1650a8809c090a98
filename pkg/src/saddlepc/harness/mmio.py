"""Matrix Market coordinate-format reader and writer (real, general/symmetric)."""
from __future__ import annotations

import os

import numpy as np

from ..errors import ParseError, UnsupportedField
from ..sparse import SparseMatrix

BANNER = "%%MatrixMarket"


def read_matrix_market(path: str | os.PathLike) -> SparseMatrix:
    """Parse a coordinate Matrix Market file into canonical CSR.

    Symmetric files store the lower triangle; each off-diagonal entry is
    mirrored.  Duplicate entries are summed.
    """
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError("empty file", 1)
    head = lines[0].split()
    if len(head) != 5 or head[0] != BANNER:
        raise ParseError("missing %%MatrixMarket banner", 1)
    obj, fmt, field, symm = (h.lower() for h in head[1:])
    if obj != "matrix" or fmt != "coordinate":
        raise ParseError(f"only 'matrix coordinate' is supported, got '{obj} {fmt}'", 1)
    if field not in ("real", "integer", "double"):
        raise UnsupportedField(f"field '{field}' is not supported", 1)
    if symm not in ("general", "symmetric"):
        raise UnsupportedField(f"symmetry '{symm}' is not supported", 1)

    lineno = 1
    size = None
    for lineno in range(2, len(lines) + 1):
        s = lines[lineno - 1].strip()
        if s and not s.startswith("%"):
            size = s.split()
            break
    if size is None:
        raise ParseError("missing size line", lineno)
    try:
        nrows, ncols, nnz = (int(t) for t in size)
    except ValueError:
        raise ParseError(f"bad size line {' '.join(size)!r}", lineno) from None

    rows = np.empty(nnz, dtype=np.int64)
    cols = np.empty(nnz, dtype=np.int64)
    vals = np.empty(nnz)
    count = 0
    for lineno in range(lineno + 1, len(lines) + 1):
        s = lines[lineno - 1].strip()
        if not s or s.startswith("%"):
            continue
        parts = s.split()
        if len(parts) != 3:
            raise ParseError(f"expected 'row col value', got {s!r}", lineno)
        if count >= nnz:
            raise ParseError(f"more than the declared {nnz} entries", lineno)
        try:
            i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise ParseError(f"cannot parse entry {s!r}", lineno) from None
        if not (1 <= i <= nrows and 1 <= j <= ncols):
            raise ParseError(f"index ({i}, {j}) outside {nrows}x{ncols}", lineno)
        if symm == "symmetric" and j > i:
            raise ParseError("symmetric file has an entry above the diagonal", lineno)
        rows[count], cols[count], vals[count] = i - 1, j - 1, v
        count += 1
    if count != nnz:
        raise ParseError(f"declared {nnz} entries, found {count}", len(lines))
    if symm == "symmetric":
        off = rows != cols
        rows, cols, vals = (np.concatenate([rows, cols[off]]), np.concatenate([cols, rows[off]]),
                            np.concatenate([vals, vals[off]]))
    return SparseMatrix.from_coo(nrows, ncols, rows, cols, vals)


def write_matrix_market(path: str | os.PathLike, M: SparseMatrix, symmetric: bool = False,
                        comment: str = "") -> None:
    """Write ``M`` in coordinate format; ``repr`` keeps every float exact."""
    r, c, v = M.row_indices(), M.col_idx, M.values
    if symmetric:
        if not M.is_symmetric():
            raise ValueError("matrix is not symmetric")
        low = r >= c
        r, c, v = r[low], c[low], v[low]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{BANNER} matrix coordinate real {'symmetric' if symmetric else 'general'}\n")
        for line in comment.splitlines():
            fh.write(f"% {line}\n")
        fh.write(f"{M.nrows} {M.ncols} {len(v)}\n")
        for i, j, x in zip(r.tolist(), c.tolist(), v.tolist()):
            fh.write(f"{i + 1} {j + 1} {x!r}\n")
