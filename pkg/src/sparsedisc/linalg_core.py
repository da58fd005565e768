"""Sparse and dense kernels shared by the whole pipeline.

The sparse input matrix is stored in canonical CSR form (sorted column
indices, no duplicates, no explicit zeros) on top of ``scipy.sparse``.
Dense intermediates are plain ``numpy`` arrays.  The growing projection
subspace lives in :class:`OrthonormalBasis`.
"""

from __future__ import annotations

from typing import Iterator, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse as sp

# "s' != 0" test of Gram-Schmidt, relative to max(1, ||s||).
DROP_TOL = 1e-10
# Project twice when cancellation wiped out more than this fraction.
REORTH_RATIO = 1e-3
# Pivoted-QR diagonal cutoff, relative to |r_11|.
QR_RANK_TOL = 1e-12
# Upper bound on the number of floats in a dense row chunk.
CHUNK_ELEMS = 1 << 17


def as_dense(x, name: str = "matrix") -> np.ndarray:
    """Return ``x`` as a float64 array, rejecting NaN and Inf."""
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


class CsrMatrix:
    """Immutable real sparse matrix in canonical row-major form.

    Build with :meth:`from_dense`, :meth:`from_coo` or :meth:`from_scipy`;
    the raw constructor validates an already-canonical triple.
    """

    __slots__ = ("_mat",)

    def __init__(self, n_rows: int, n_cols: int, row_offsets, col_indices, values):
        row_offsets = np.asarray(row_offsets, dtype=np.int64)
        col_indices = np.asarray(col_indices, dtype=np.int64)
        values = as_dense(values, "values")
        if n_rows < 0 or n_cols < 0:
            raise ValueError("matrix dimensions must be non-negative")
        if row_offsets.shape != (n_rows + 1,) or row_offsets[0] != 0:
            raise ValueError("row_offsets must have length n_rows + 1 and start at 0")
        if np.any(np.diff(row_offsets) < 0):
            raise ValueError("row_offsets must be non-decreasing")
        nnz = int(row_offsets[-1])
        if col_indices.shape != (nnz,) or values.shape != (nnz,):
            raise ValueError("nnz does not match row_offsets[n_rows]")
        if nnz and (col_indices.min() < 0 or col_indices.max() >= n_cols):
            raise ValueError("column index out of range")
        if np.any(values == 0.0):
            raise ValueError("explicit zeros are not allowed")
        for i in range(n_rows):
            seg = col_indices[row_offsets[i]:row_offsets[i + 1]]
            if seg.size > 1 and np.any(np.diff(seg) <= 0):
                raise ValueError(f"column indices of row {i} are not strictly increasing")
        self._mat = sp.csr_array((values, col_indices, row_offsets), shape=(n_rows, n_cols))

    @classmethod
    def _wrap(cls, mat: sp.csr_array) -> "CsrMatrix":
        obj = cls.__new__(cls)
        obj._mat = mat
        return obj

    @classmethod
    def from_scipy(cls, mat) -> "CsrMatrix":
        csr = sp.csr_array(mat, dtype=np.float64, copy=True)
        csr.sum_duplicates()
        csr.eliminate_zeros()
        csr.sort_indices()
        if csr.nnz and not np.all(np.isfinite(csr.data)):
            raise ValueError("matrix contains non-finite entries")
        csr.indptr = csr.indptr.astype(np.int64)
        csr.indices = csr.indices.astype(np.int64)
        return cls._wrap(csr)

    @classmethod
    def from_dense(cls, arr) -> "CsrMatrix":
        arr = as_dense(arr)
        if arr.ndim != 2:
            raise ValueError("expected a 2-d array")
        return cls.from_scipy(sp.csr_array(arr))

    @classmethod
    def from_coo(cls, rows, cols, vals, shape: Tuple[int, int]) -> "CsrMatrix":
        """Duplicates are summed; entries summing to zero are dropped."""
        coo = sp.coo_array((as_dense(vals, "values"), (np.asarray(rows), np.asarray(cols))), shape=shape)
        return cls.from_scipy(coo.tocsr())

    @classmethod
    def zeros(cls, n_rows: int, n_cols: int) -> "CsrMatrix":
        return cls.from_scipy(sp.csr_array((n_rows, n_cols)))

    # -- views -----------------------------------------------------------
    @property
    def n_rows(self) -> int:
        return self._mat.shape[0]

    @property
    def n_cols(self) -> int:
        return self._mat.shape[1]

    @property
    def shape(self) -> Tuple[int, int]:
        return self._mat.shape

    @property
    def nnz(self) -> int:
        return int(self._mat.nnz)

    @property
    def row_offsets(self) -> np.ndarray:
        return self._mat.indptr

    @property
    def col_indices(self) -> np.ndarray:
        return self._mat.indices

    @property
    def values(self) -> np.ndarray:
        return self._mat.data

    @property
    def scipy(self) -> sp.csr_array:
        return self._mat

    def toarray(self) -> np.ndarray:
        return self._mat.toarray()

    def __eq__(self, other) -> bool:
        if not isinstance(other, CsrMatrix):
            return NotImplemented
        return (
            self.shape == other.shape
            and np.array_equal(self.row_offsets, other.row_offsets)
            and np.array_equal(self.col_indices, other.col_indices)
            and np.array_equal(self.values, other.values)
        )

    def __repr__(self) -> str:
        return f"CsrMatrix(shape={self.shape}, nnz={self.nnz})"

    # -- arithmetic ------------------------------------------------------
    def dot(self, x) -> np.ndarray:
        """``A @ x`` for a dense vector or matrix ``x``."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape[0] != self.n_cols:
            raise ValueError(f"dimension mismatch: A has {self.n_cols} columns, operand has {x.shape[0]} rows")
        return self._mat @ x

    def rdot(self, y) -> np.ndarray:
        """``y @ A`` for a dense vector or matrix ``y``."""
        y = np.asarray(y, dtype=np.float64)
        if y.shape[-1] != self.n_rows:
            raise ValueError(f"dimension mismatch: A has {self.n_rows} rows, operand has {y.shape[-1]} columns")
        return (self._mat.T @ y.T).T

    def row_dense(self, j: int) -> np.ndarray:
        out = np.zeros(self.n_cols)
        lo, hi = self.row_offsets[j], self.row_offsets[j + 1]
        out[self.col_indices[lo:hi]] = self.values[lo:hi]
        return out

    def rows_dense(self, start: int, stop: int) -> np.ndarray:
        return self._mat[start:stop].toarray()

    def select_rows(self, idx) -> "CsrMatrix":
        return CsrMatrix._wrap(sp.csr_array(self._mat[np.asarray(idx, dtype=np.int64)]))

    def select_columns(self, idx) -> "CsrMatrix":
        sub = sp.csr_array(self._mat[:, np.asarray(idx, dtype=np.int64)])
        return CsrMatrix.from_scipy(sub)

    def scale_rows(self, w) -> "CsrMatrix":
        w = np.asarray(w, dtype=np.float64)
        return CsrMatrix.from_scipy(sp.diags_array(w) @ self._mat)

    def row_norms(self) -> np.ndarray:
        sq = self._mat.multiply(self._mat).sum(axis=1)
        return np.sqrt(np.asarray(sq, dtype=np.float64).ravel())

    def row_chunks(self, width: int) -> Iterator[Tuple[int, int]]:
        """Yield ``(start, stop)`` row ranges whose dense blocks of ``width``
        columns stay under ``CHUNK_ELEMS`` floats."""
        step = max(1, CHUNK_ELEMS // max(1, width))
        for start in range(0, self.n_rows, step):
            yield start, min(self.n_rows, start + step)


class OrthonormalBasis:
    """Rows ``v_1..v_l`` of ``V``, orthonormal, in ambient dimension ``n``.

    Single writer.  Storage is a preallocated ``n x n`` buffer so appends
    are O(n).
    """

    def __init__(self, n: int, rows: Optional[Sequence] = None, ortho_tol: float = 1e-8):
        if n < 0:
            raise ValueError("ambient dimension must be non-negative")
        self.n = int(n)
        self.ortho_tol = float(ortho_tol)
        self._buf = np.zeros((max(self.n, 1), self.n))
        self._len = 0
        if rows is not None:
            for r in as_dense(rows).reshape(-1, self.n):
                self._push(r)
            if self.gram_error() > self.ortho_tol:
                raise ValueError("rows are not orthonormal within ortho_tol")

    @classmethod
    def empty(cls, n: int) -> "OrthonormalBasis":
        return cls(n)

    @property
    def rows(self) -> np.ndarray:
        """``l x n`` view of the current basis."""
        return self._buf[: self._len]

    def __len__(self) -> int:
        return self._len

    def copy(self) -> "OrthonormalBasis":
        out = OrthonormalBasis(self.n, ortho_tol=self.ortho_tol)
        out._buf[: self._len] = self.rows
        out._len = self._len
        return out

    def _push(self, v: np.ndarray) -> None:
        if v.shape != (self.n,):
            raise ValueError(f"dimension mismatch: expected length {self.n}, got {v.shape}")
        if self._len >= self.n:
            raise ValueError("basis is already full rank")
        self._buf[self._len] = v
        self._len += 1

    def gram_error(self) -> float:
        """``max |V V^T - I|``; 0 for an empty basis."""
        if self._len == 0:
            return 0.0
        V = self.rows
        return float(np.max(np.abs(V @ V.T - np.eye(self._len))))

    def projector(self) -> np.ndarray:
        V = self.rows
        return V.T @ V


def project_complement(V: OrthonormalBasis, y) -> np.ndarray:
    """Return ``(I - V^T V) y``; ``y`` may be a vector or an ``n x k`` block."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape[0] != V.n:
        raise ValueError(f"dimension mismatch: V.n={V.n}, len(y)={y.shape[0]}")
    if len(V) == 0:
        return y.copy()
    W = V.rows
    return y - W.T @ (W @ y)


def orthogonalize(s, V: OrthonormalBasis) -> OrthonormalBasis:
    """Gram-Schmidt step: append the normalised residual of ``s`` to ``V``.

    ``V`` is modified in place and returned.  A residual of norm at most
    ``DROP_TOL * max(1, ||s||)`` is treated as zero.
    """
    s = np.asarray(s, dtype=np.float64)
    if s.shape != (V.n,):
        raise ValueError(f"dimension mismatch: V.n={V.n}, len(s)={s.shape}")
    s_norm = float(np.linalg.norm(s))
    r = project_complement(V, s)
    r_norm = float(np.linalg.norm(r))
    if r_norm < REORTH_RATIO * s_norm:
        r = project_complement(V, r)
        r_norm = float(np.linalg.norm(r))
    if r_norm <= DROP_TOL * max(1.0, s_norm) or len(V) >= V.n:
        return V
    V._push(r / r_norm)
    return V


def qr_r_factor(M, pivoting: bool = False):
    """R factor of ``M = Q R``; with ``pivoting`` returns ``(R, perm)`` where
    ``M[:, perm] = Q R``.

    ``R`` is always ``n x n`` (zero-padded if ``M`` has fewer rows).
    """
    M = as_dense(M)
    k, n = M.shape
    if pivoting:
        R, perm = scipy.linalg.qr(M, mode="r", pivoting=True)
    else:
        (R,) = scipy.linalg.qr(M, mode="r")
        perm = np.arange(n)
    R = np.triu(R[: min(k, n)])
    if R.shape[0] < n:
        R = np.vstack([R, np.zeros((n - R.shape[0], n))])
    return (R, perm) if pivoting else R


def triangular_pinv(R: np.ndarray, perm: np.ndarray, rel_tol: float = QR_RANK_TOL) -> np.ndarray:
    """Right pseudo-inverse of a pivoted R factor.

    Returns ``X`` (``n x r``, ``r`` = numerical rank) such that ``M @ X``
    equals the first ``r`` columns of ``Q``.  Diagonal entries below
    ``rel_tol * |r_11|`` count as zero.
    """
    n = R.shape[1]
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag[0] == 0.0:
        return np.zeros((n, 0))
    rank = int(np.sum(diag > rel_tol * diag[0]))
    R11 = R[:rank, :rank]
    X = np.zeros((n, rank))
    X[perm[:rank]] = scipy.linalg.solve_triangular(R11, np.eye(rank), lower=False)
    return X


def sym_eig_desc(H) -> Tuple[np.ndarray, OrthonormalBasis]:
    """Eigendecomposition of a symmetric PSD matrix, eigenvalues descending.

    Eigenvectors are returned as the rows of an :class:`OrthonormalBasis`.
    """
    H = as_dense(H)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError("expected a square matrix")
    scale = float(np.max(np.abs(H))) if H.size else 0.0
    if H.size and np.max(np.abs(H - H.T)) > 1e-9 * max(scale, np.finfo(float).tiny):
        raise ValueError("matrix is not symmetric")
    n = H.shape[0]
    w, U = scipy.linalg.eigh((H + H.T) / 2.0)
    order = np.argsort(-w, kind="stable")
    w, U = w[order], U[:, order]
    basis = OrthonormalBasis(n)
    basis._buf[:n] = U.T
    basis._len = n
    return w, basis


def row_norms_exact(A: CsrMatrix, V: OrthonormalBasis) -> np.ndarray:
    """Exact row norms of ``A (I - V^T V)``, computed chunk by chunk."""
    if A.n_cols != V.n:
        raise ValueError(f"dimension mismatch: A has {A.n_cols} columns, V.n={V.n}")
    out = np.empty(A.n_rows)
    if len(V) == 0:
        return A.row_norms()
    W = V.rows
    for lo, hi in A.row_chunks(A.n_cols):
        X = A.rows_dense(lo, hi)
        X -= (X @ W.T) @ W
        out[lo:hi] = np.linalg.norm(X, axis=1)
    return out


def residual_rows(A: CsrMatrix, V: OrthonormalBasis, idx) -> np.ndarray:
    """Dense rows ``idx`` of ``A (I - V^T V)``."""
    X = A.select_rows(idx).toarray()
    if len(V):
        W = V.rows
        X -= (X @ W.T) @ W
    return X
