"""Sparse matrix assembly and direct solves.

Matrices are plain ``scipy.sparse.csr_matrix`` objects with sorted, unique
column indices. Factorizations go through SuperLU (partial pivoting) and are
wrapped so that singular systems raise instead of returning garbage.
"""

from __future__ import annotations

from collections import OrderedDict
from pathlib import Path
from typing import Hashable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class SingularMatrixError(RuntimeError):
    """Raised when a factorization meets a zero (or numerically zero) pivot."""


def finalize_from_triplets(rows, cols, vals, shape) -> sp.csr_matrix:
    """Build a CSR matrix from (row, col, value) triplets.

    Duplicate entries are summed. Contributions are sorted by
    ``(row, col, value)`` before summation, so the result is bit-for-bit
    independent of the order in which triplets were produced.
    """
    rows = np.asarray(rows, dtype=np.int64).ravel()
    cols = np.asarray(cols, dtype=np.int64).ravel()
    vals = np.asarray(vals, dtype=float).ravel()
    n_rows, n_cols = shape
    if not (rows.size == cols.size == vals.size):
        raise ValueError("triplet arrays differ in length")
    if rows.size and (rows.min() < 0 or rows.max() >= n_rows or cols.min() < 0 or cols.max() >= n_cols):
        raise IndexError(f"triplet index out of range for shape {shape}")
    if rows.size == 0:
        return sp.csr_matrix((n_rows, n_cols))

    order = np.lexsort((vals, cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    key = rows * n_cols + cols
    starts = np.flatnonzero(np.r_[True, key[1:] != key[:-1]])
    summed = np.add.reduceat(vals, starts)
    urows, ucols = rows[starts], cols[starts]

    indptr = np.zeros(n_rows + 1, dtype=np.int64)
    np.add.at(indptr, urows + 1, 1)
    np.cumsum(indptr, out=indptr)
    mat = sp.csr_matrix((summed, ucols, indptr), shape=(n_rows, n_cols))
    mat.has_sorted_indices = True
    return mat


def from_dense(a) -> sp.csr_matrix:
    a = np.asarray(a, dtype=float)
    r, c = np.nonzero(a)
    return finalize_from_triplets(r, c, a[r, c], a.shape)


def matvec(a, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if a.shape[1] != x.shape[0]:
        raise ValueError(f"shape mismatch: matrix {a.shape} vs vector {x.shape}")
    return np.asarray(a @ x, dtype=float)


class Factorization:
    """LU factorization of a square sparse matrix with a checked solve."""

    def __init__(self, a):
        a = sp.csc_matrix(a)
        if a.shape[0] != a.shape[1]:
            raise ValueError(f"matrix must be square, got {a.shape}")
        self.shape = a.shape
        self._a = a
        try:
            self._lu = spla.splu(a, permc_spec="COLAMD")
        except RuntimeError as exc:
            raise SingularMatrixError(str(exc)) from exc
        diag = np.abs(self._lu.U.diagonal())
        if diag.size and (not np.all(np.isfinite(diag)) or diag.min() <= 1e-14 * diag.max()):
            raise SingularMatrixError(
                f"pivot ratio {diag.min() / max(diag.max(), 1e-300):.3e} below working precision"
            )

    def solve(self, b) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if b.shape[0] != self.shape[0]:
            raise ValueError(f"rhs length {b.shape[0]} does not match {self.shape}")
        x = self._lu.solve(b)
        if not np.all(np.isfinite(x)):
            raise SingularMatrixError("solve produced non-finite values")
        return x


def solve_direct(a, b) -> np.ndarray:
    """Solve ``a @ x = b`` with sparse LU; raises SingularMatrixError."""
    return Factorization(a).solve(b)


class FactorizationCache:
    """Small LRU cache of factorizations keyed by a caller-supplied fingerprint.

    Under variable stepping the implicit matrix changes with every (k, tau)
    pair, so only repeated keys (constant-step runs) hit the cache.
    """

    def __init__(self, maxsize: int = 4):
        self.maxsize = maxsize
        self._store: OrderedDict[Hashable, Factorization] = OrderedDict()
        self.hits = 0
        self.misses = 0

    def get(self, key: Hashable, build) -> Factorization:
        if key in self._store:
            self._store.move_to_end(key)
            self.hits += 1
            return self._store[key]
        self.misses += 1
        fact = Factorization(build())
        self._store[key] = fact
        if len(self._store) > self.maxsize:
            self._store.popitem(last=False)
        return fact


def write_matrix_market(a, path) -> None:
    """Dump a sparse matrix as MatrixMarket coordinate text (1-based)."""
    coo = sp.coo_matrix(a)
    order = np.lexsort((coo.col, coo.row))
    lines = [
        "%%MatrixMarket matrix coordinate real general",
        f"{coo.shape[0]} {coo.shape[1]} {coo.nnz}",
    ]
    for i in order:
        lines.append(f"{coo.row[i] + 1} {coo.col[i] + 1} {coo.data[i]:.17g}")
    Path(path).write_text("\n".join(lines) + "\n")
