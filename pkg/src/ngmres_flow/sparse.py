"""Minimal CSR sparse matrices and a direct LU solver for 2D saddle-point systems.

The factorization is delegated to SuperLU (scipy.sparse.linalg.splu) with
threshold partial pivoting, which handles the zero pressure-pressure block of
saddle-point matrices without special casing.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

PIVOT_THRESHOLD = 0.1
SINGULARITY_RTOL = 1e-14


class SparseStructureError(ValueError):
    """Raised for out-of-range indices or shape mismatches."""


class SingularMatrixError(RuntimeError):
    """Raised when a factorization encounters a (near-)zero pivot."""


@dataclass(frozen=True)
class SparseMatrix:
    """Square or rectangular matrix in canonical CSR form.

    Within each row the column indices are strictly increasing and duplicate
    entries have been summed.
    """

    nrows: int
    ncols: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray

    @classmethod
    def from_scipy(cls, a) -> "SparseMatrix":
        a = sp.csr_matrix(a)
        a.sum_duplicates()
        a.sort_indices()
        return cls(
            nrows=a.shape[0],
            ncols=a.shape[1],
            row_offsets=a.indptr.astype(np.int64),
            col_indices=a.indices.astype(np.int64),
            values=a.data.astype(np.float64),
        )

    def to_scipy(self) -> sp.csr_matrix:
        return sp.csr_matrix(
            (self.values, self.col_indices, self.row_offsets),
            shape=(self.nrows, self.ncols),
        )

    def toarray(self) -> np.ndarray:
        return self.to_scipy().toarray()

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.ncols,):
            raise SparseStructureError(
                f"matvec expects a vector of length {self.ncols}, got shape {x.shape}"
            )
        return self.to_scipy() @ x

    @property
    def nnz(self) -> int:
        return len(self.values)


def assemble(triplets, nrows: int, ncols: int) -> SparseMatrix:
    """Build a canonical CSR matrix from (row, col, value) triplets.

    Duplicate entries are summed.  The result is independent of triplet order.
    """
    if triplets:
        rows, cols, vals = (np.asarray(x) for x in zip(*triplets))
    else:
        rows = cols = np.zeros(0, dtype=np.int64)
        vals = np.zeros(0)
    return assemble_arrays(rows, cols, vals, nrows, ncols)


def assemble_arrays(rows, cols, vals, nrows: int, ncols: int) -> SparseMatrix:
    """Array-based variant of :func:`assemble` for vectorized callers."""
    rows = np.asarray(rows, dtype=np.int64).ravel()
    cols = np.asarray(cols, dtype=np.int64).ravel()
    vals = np.asarray(vals, dtype=np.float64).ravel()
    if not (rows.shape == cols.shape == vals.shape):
        raise SparseStructureError("triplet arrays must have matching lengths")
    if rows.size and (rows.min() < 0 or rows.max() >= nrows):
        raise SparseStructureError("row index out of range")
    if cols.size and (cols.min() < 0 or cols.max() >= ncols):
        raise SparseStructureError("column index out of range")
    a = sp.coo_matrix((vals, (rows, cols)), shape=(nrows, ncols))
    return SparseMatrix.from_scipy(a)


@dataclass
class LuFactors:
    """LU factorization P_r A P_c^T = L U with unit-lower L and upper U."""

    row_perm: np.ndarray
    col_perm: np.ndarray
    L: SparseMatrix
    U: SparseMatrix
    nrows: int
    _handle: object = field(repr=False, default=None)

    def permuted(self, a: SparseMatrix) -> np.ndarray:
        """Dense P_r A P_c^T, for verifying the factorization identity."""
        dense = a.toarray()
        return dense[self.row_perm][:, self.col_perm]


def lu_factor(a: SparseMatrix) -> LuFactors:
    """Sparse LU with threshold partial pivoting and fill-reducing ordering."""
    if a.nrows != a.ncols:
        raise SparseStructureError("lu_factor requires a square matrix")
    m = a.to_scipy().tocsc()
    row_max = np.abs(m).max(axis=0).toarray().ravel()
    scale = float(row_max.max()) if row_max.size else 0.0
    try:
        handle = splu(
            m,
            diag_pivot_thresh=PIVOT_THRESHOLD,
            options=dict(SymmetricMode=False),
        )
    except RuntimeError as exc:  # SuperLU reports exact singularity this way
        raise SingularMatrixError(str(exc)) from exc
    diag = handle.U.diagonal()
    bad = np.nonzero(np.abs(diag) < SINGULARITY_RTOL * max(scale, 1e-300))[0]
    if bad.size:
        raise SingularMatrixError(
            f"numerically singular: pivot {bad[0]} has magnitude {abs(diag[bad[0]]):.3e}"
        )
    # Convert SuperLU's perm_r/perm_c so that permuted(A) == (L U).toarray():
    # A[row_perm][:, col_perm] = L @ U with row_perm = argsort(perm_r) and
    # col_perm = argsort(perm_c).
    return LuFactors(
        row_perm=np.argsort(handle.perm_r),
        col_perm=np.argsort(handle.perm_c),
        L=SparseMatrix.from_scipy(handle.L),
        U=SparseMatrix.from_scipy(handle.U),
        nrows=a.nrows,
        _handle=handle,
    )


def lu_solve(factors: LuFactors, b: np.ndarray) -> np.ndarray:
    """Solve A x = b using precomputed factors."""
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (factors.nrows,):
        raise SparseStructureError(
            f"rhs length {b.shape} does not match matrix size {factors.nrows}"
        )
    return factors._handle.solve(b)
