"""Seeded sketching operators and their application to sparse matrices.

Every random choice is drawn from an :class:`RngStream`, a ``(seed,
stream_id)`` pair mapped to a PCG64 generator through ``SeedSequence``.
Hash-based sketches draw polynomial hash functions over the Mersenne prime
``2**61 - 1``; degree-3 polynomials give exactly 4-wise independence.
"""

from __future__ import annotations

import enum
import hashlib
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
import scipy.sparse as sp

from .linalg_core import CHUNK_ELEMS, CsrMatrix, OrthonormalBasis, as_dense

MERSENNE_61 = (1 << 61) - 1
_MASK31 = np.uint64((1 << 31) - 1)
_MASK30 = np.uint64((1 << 30) - 1)
_P = np.uint64(MERSENNE_61)

# Sketch-dimension constants (the analysis only fixes them up to Theta).
JL_CONSTANT = 1.0
EMBED_ROWS_CONSTANT = 4.0
EMBED_SPARSITY_CONSTANT = 2.0

_U64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    """A reproducible, domain-separated random stream.

    ``generator()`` always returns a *fresh* generator positioned at the start
    of the stream, so a stream used twice yields the same numbers twice.
    Use :meth:`child` to derive independent substreams.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        if not (0 <= self.seed <= _U64 and 0 <= self.stream_id <= _U64):
            raise ValueError("seed and stream_id must be 64-bit unsigned integers")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, *labels) -> "RngStream":
        h = hashlib.blake2b(digest_size=8)
        h.update(str(self.stream_id).encode())
        for label in labels:
            h.update(b"/")
            h.update(str(label).encode())
        return RngStream(self.seed, int.from_bytes(h.digest(), "little"))


def _mulmod(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``a * b mod (2**61 - 1)`` for uint64 arrays with entries below the prime."""
    a_hi, a_lo = a >> np.uint64(31), a & _MASK31
    b_hi, b_lo = b >> np.uint64(31), b & _MASK31
    hh = a_hi * b_hi
    mid = a_hi * b_lo + a_lo * b_hi
    ll = a_lo * b_lo
    s = (hh << np.uint64(1)) + (mid >> np.uint64(30)) + ((mid & _MASK30) << np.uint64(31)) + ll
    return _reduce(s)


def _reduce(s: np.ndarray) -> np.ndarray:
    x = (s & _P) + (s >> np.uint64(61))
    return np.where(x >= _P, x - _P, x)


@dataclass(frozen=True)
class PolyHash:
    """``h(x) = sum_i c_i x^i mod p``; ``k`` coefficients give k-wise independence."""

    coeffs: tuple

    @classmethod
    def draw(cls, k: int, gen: np.random.Generator) -> "PolyHash":
        c = gen.integers(0, MERSENNE_61, size=k, dtype=np.uint64)
        if k > 1 and c[-1] == 0:
            c[-1] = 1
        return cls(tuple(int(v) for v in c))

    def __call__(self, x) -> np.ndarray:
        x = _reduce(np.asarray(x, dtype=np.uint64))
        acc = np.full(x.shape, self.coeffs[-1], dtype=np.uint64)
        for c in reversed(self.coeffs[:-1]):
            acc = _reduce(_mulmod(acc, x) + np.uint64(c))
        return acc

    def bucket(self, x, b: int) -> np.ndarray:
        return (self(x) % np.uint64(b)).astype(np.int64)

    def sign(self, x) -> np.ndarray:
        return np.where(self(x) & np.uint64(1), -1.0, 1.0)


class SketchKind(enum.Enum):
    GAUSSIAN = "gaussian"
    AMS = "ams"
    COUNT_SKETCH = "countsketch"
    SPARSE_EMBEDDING_I = "sparse1"
    SPARSE_EMBEDDING_II = "sparse2"
    COUNT_SKETCH_GAUSSIAN = "countsketch+gaussian"


@dataclass(frozen=True, eq=False)
class SketchOperator:
    """A ``rows x cols`` random linear map ``R^cols -> R^rows``.

    Sparse kinds keep a CSR representation, the dense kinds a dense array;
    ``COUNT_SKETCH_GAUSSIAN`` keeps both factors ``S = G @ Pi``.
    """

    kind: SketchKind
    rows: int
    cols: int
    params: dict
    rng: Optional[RngStream]
    _dense: Optional[np.ndarray] = field(default=None, repr=False)
    _sparse: Optional[sp.csr_array] = field(default=None, repr=False)

    def dense(self) -> np.ndarray:
        """The operator as a dense ``rows x cols`` array."""
        if self.kind is SketchKind.COUNT_SKETCH_GAUSSIAN:
            return (self._sparse.T @ self._dense.T).T
        if self._dense is not None:
            return self._dense
        return self._sparse.toarray()

    @property
    def sparse(self) -> Optional[sp.csr_array]:
        return self._sparse

    def column_nnz(self) -> np.ndarray:
        if self._sparse is None:
            raise ValueError(f"{self.kind.value} sketch is dense")
        return np.diff(self._sparse.tocsc().indptr)


def _partial_fisher_yates(b: int, s: int, n_cols: int, gen: np.random.Generator) -> np.ndarray:
    """``n_cols x s`` array; row ``i`` is a uniform ``s``-subset of ``range(b)``
    in draw order.

    The first ``s`` swaps of a Fisher-Yates shuffle of ``range(b)``, with the
    permutation stored sparsely: only swapped-out positions are recorded, so
    the cost is O(s^2) per column rather than O(b).
    """
    keys = np.empty((n_cols, s), dtype=np.int64)
    vals = np.empty((n_cols, s), dtype=np.int64)
    out = np.empty((n_cols, s), dtype=np.int64)
    rows = np.arange(n_cols)

    def lookup(p, t):
        if t == 0:
            return p
        match = keys[:, :t] == p[:, None]
        last = t - 1 - np.argmax(match[:, ::-1], axis=1)
        return np.where(match.any(axis=1), vals[rows, last], p)

    for t in range(s):
        j = t + gen.integers(0, b - t, size=n_cols)
        out[:, t] = lookup(j, t)
        vals[:, t] = lookup(np.full(n_cols, t, dtype=np.int64), t)
        keys[:, t] = j
    return out


def _sparse_embedding_blocks(b: int, s: int, n_cols: int, gen: np.random.Generator):
    """Yield ``(lo, hi, positions, values)`` for consecutive column blocks of
    a sparse embedding; blocks are sized so the swap tables stay bounded."""
    block = max(1, CHUNK_ELEMS // s)
    for lo in range(0, n_cols, block):
        hi = min(n_cols, lo + block)
        pos = _partial_fisher_yates(b, s, hi - lo, gen)
        vals = gen.choice(np.array([-1.0, 1.0]), size=(hi - lo, s)) / math.sqrt(s)
        yield lo, hi, pos, vals


def _csr_from_columns(row_idx: np.ndarray, vals: np.ndarray, rows: int, cols: int) -> sp.csr_array:
    """Build a CSR operator from ``cols x s`` row positions and values."""
    s = row_idx.shape[1]
    col_idx = np.repeat(np.arange(cols), s)
    mat = sp.csr_array((vals.ravel(), (row_idx.ravel(), col_idx)), shape=(rows, cols))
    mat.sum_duplicates()
    mat.sort_indices()
    return mat


def count_sketch_from_hashes(buckets, signs, rows: int) -> SketchOperator:
    """CountSketch with explicitly chosen buckets ``h(i)`` and signs ``sigma(i)``."""
    buckets = np.asarray(buckets, dtype=np.int64)
    signs = np.asarray(signs, dtype=np.float64)
    cols = buckets.size
    if np.any(buckets < 0) or np.any(buckets >= rows) or not np.all(np.abs(signs) == 1.0):
        raise ValueError("buckets must lie in [0, rows) and signs in {-1, +1}")
    mat = _csr_from_columns(buckets[:, None], signs[:, None], rows, cols)
    return SketchOperator(SketchKind.COUNT_SKETCH, rows, cols, {}, None, None, mat)


def make_sketch(kind, rows: int, cols: int, params: Optional[dict] = None,
                rng: Optional[RngStream] = None) -> SketchOperator:
    """Construct a seeded sketching operator.

    params:
      GAUSSIAN: ``sigma`` (default ``1/sqrt(rows)``)
      SPARSE_EMBEDDING_I / II: ``s`` column sparsity
      COUNT_SKETCH_GAUSSIAN: ``t`` inner CountSketch dimension, ``sigma``
    """
    kind = SketchKind(kind)
    params = dict(params or {})
    if rows < 1 or cols < 1:
        raise ValueError("sketch dimensions must be positive")
    if rng is None:
        rng = RngStream(0)
    gen = rng.generator()

    if kind is SketchKind.GAUSSIAN:
        sigma = float(params.setdefault("sigma", 1.0 / math.sqrt(rows)))
        mat = sigma * gen.standard_normal((rows, cols))
        return SketchOperator(kind, rows, cols, params, rng, mat, None)

    if kind is SketchKind.AMS:
        keys = np.arange(cols, dtype=np.uint64)
        mat = np.empty((rows, cols))
        for i in range(rows):
            mat[i] = PolyHash.draw(4, gen).sign(keys)
        mat /= math.sqrt(rows)
        return SketchOperator(kind, rows, cols, params, rng, mat, None)

    if kind is SketchKind.COUNT_SKETCH:
        keys = np.arange(cols, dtype=np.uint64)
        h = PolyHash.draw(2, gen)
        sigma = PolyHash.draw(4, gen)
        mat = _csr_from_columns(h.bucket(keys, rows)[:, None], sigma.sign(keys)[:, None], rows, cols)
        return SketchOperator(kind, rows, cols, params, rng, None, mat)

    if kind is SketchKind.SPARSE_EMBEDDING_I:
        s = int(params.get("s", 1))
        if s < 1 or s > rows:
            raise ValueError("sparsity s must satisfy 1 <= s <= rows")
        parts = list(_sparse_embedding_blocks(rows, s, cols, gen))
        pos = np.vstack([p[2] for p in parts])
        vals = np.vstack([p[3] for p in parts])
        return SketchOperator(kind, rows, cols, params, rng, None, _csr_from_columns(pos, vals, rows, cols))

    if kind is SketchKind.SPARSE_EMBEDDING_II:
        s = int(params.get("s", 1))
        if s < 1 or s > rows:
            raise ValueError("sparsity s must satisfy 1 <= s <= rows")
        if rows % s:
            raise ValueError("rows must be divisible by s for sparse embedding II")
        width = rows // s
        h = PolyHash.draw(2, gen)
        sigma = PolyHash.draw(4, gen)
        keys = (np.arange(cols, dtype=np.uint64)[:, None] * np.uint64(s)
                + np.arange(s, dtype=np.uint64)[None, :])
        pos = np.arange(s)[None, :] * width + h.bucket(keys, width)
        vals = sigma.sign(keys) / math.sqrt(s)
        return SketchOperator(kind, rows, cols, params, rng, None, _csr_from_columns(pos, vals, rows, cols))

    # COUNT_SKETCH_GAUSSIAN
    t = int(params.get("t", 0))
    if t < 1:
        raise ValueError("inner dimension t must be positive")
    sigma = float(params.setdefault("sigma", 1.0 / math.sqrt(rows)))
    cs = make_sketch(SketchKind.COUNT_SKETCH, t, cols, rng=rng.child("countsketch"))
    g = make_sketch(SketchKind.GAUSSIAN, rows, t, {"sigma": sigma}, rng=rng.child("gaussian"))
    return SketchOperator(kind, rows, cols, params, rng, g._dense, cs._sparse)


MatrixLike = Union[CsrMatrix, np.ndarray]


def apply_left(S: SketchOperator, A: MatrixLike) -> np.ndarray:
    """Dense ``S @ A``; sparse kinds cost O(column_sparsity * nnz(A))."""
    n_rows = A.n_rows if isinstance(A, CsrMatrix) else np.shape(A)[0]
    if S.cols != n_rows:
        raise ValueError(f"dimension mismatch: sketch has {S.cols} columns, A has {n_rows} rows")
    if isinstance(A, CsrMatrix):
        if S.kind is SketchKind.COUNT_SKETCH_GAUSSIAN:
            return S._dense @ (S._sparse @ A.scipy).toarray()
        if S._sparse is not None:
            return (S._sparse @ A.scipy).toarray()
        return A.rdot(S._dense)
    A = as_dense(A)
    if S.kind is SketchKind.COUNT_SKETCH_GAUSSIAN:
        return S._dense @ (S._sparse @ A)
    if S._sparse is not None:
        return S._sparse @ A
    return S._dense @ A


def sparse_embed_left(A: CsrMatrix, rows: int, s: int, rng: RngStream) -> np.ndarray:
    """``S @ A`` for the ``SPARSE_EMBEDDING_I`` operator that
    ``make_sketch(SPARSE_EMBEDDING_I, rows, A.n_rows, {"s": s}, rng)`` would
    build, without materializing ``S``: column blocks of ``S`` are generated
    and applied to the matching row blocks of ``A`` one at a time."""
    if s < 1 or s > rows:
        raise ValueError("sparsity s must satisfy 1 <= s <= rows")
    out = np.zeros((rows, A.n_cols))
    mat = A.scipy
    for lo, hi, pos, vals in _sparse_embedding_blocks(rows, s, A.n_rows, rng.generator()):
        out += (_csr_from_columns(pos, vals, rows, hi - lo) @ mat[lo:hi]).toarray()
    return out


def _right_factors(V: OrthonormalBasis, S: SketchOperator):
    R = S.dense().T  # n x r
    if len(V) == 0:
        return R, None, None
    W = V.rows
    return R, W.T, W @ R


def apply_right_jl(A: CsrMatrix, V: OrthonormalBasis, S: SketchOperator) -> np.ndarray:
    """``A (I - V^T V) S^T`` evaluated as ``A S^T - (A V^T)(V S^T)``.

    ``A (I - V^T V)`` is never formed.
    """
    if A.n_cols != V.n or S.cols != V.n:
        raise ValueError("dimension mismatch between A, V and the sketch")
    R, Wt, VR = _right_factors(V, S)
    out = A.dot(R)
    if Wt is not None:
        out -= A.dot(Wt) @ VR
    return out


def jl_row_norms(A: CsrMatrix, V: OrthonormalBasis, S: SketchOperator) -> np.ndarray:
    """Row norms of :func:`apply_right_jl` computed in row chunks, so no
    ``m x r`` block is held at once."""
    if A.n_cols != V.n or S.cols != V.n:
        raise ValueError("dimension mismatch between A, V and the sketch")
    R, Wt, VR = _right_factors(V, S)
    out = np.empty(A.n_rows)
    mat = A.scipy
    for lo, hi in A.row_chunks(S.rows):
        block = mat[lo:hi]
        B = block @ R
        if Wt is not None:
            B -= (block @ Wt) @ VR
        out[lo:hi] = np.linalg.norm(B, axis=1)
    return out


def jl_dimension(eps: float, m: int, n: int, delta: float, c: float = JL_CONSTANT) -> int:
    """Sketch width ``ceil(c * eps^-2 * ln(m n / delta))`` for row-norm JL."""
    return max(1, math.ceil(c * math.log(max(m * n, 2) / delta) / eps**2))


def embedding_dimensions(eps: float, n: int, delta: float,
                         c_rows: float = EMBED_ROWS_CONSTANT,
                         c_sparsity: float = EMBED_SPARSITY_CONSTANT):
    """``(rows, sparsity)`` for a sparse subspace embedding of an n-dim space."""
    lg = math.log(max(n, 2) / delta)
    rows = max(1, math.ceil(c_rows * n * lg / eps**2))
    s = min(rows, max(1, math.ceil(c_sparsity * lg / eps)))
    return rows, s


class GaussianColumns:
    """Lazily generated ``n x N`` standard Gaussian matrix.

    Columns are produced in fixed-width blocks, each from its own child
    stream, so any slice is reproducible and only a block or two is held in
    memory at a time.
    """

    def __init__(self, n: int, N: int, rng: RngStream, block: int = 256):
        if n < 1 or N < 1 or block < 1:
            raise ValueError("dimensions and block width must be positive")
        self.shape = (n, N)
        self.rng = rng
        self.block = block
        self._cache: dict = {}

    def _block(self, b: int) -> np.ndarray:
        blk = self._cache.get(b)
        if blk is None:
            n, N = self.shape
            width = min(self.block, N - b * self.block)
            blk = self.rng.child("block", b).generator().standard_normal((n, width))
            if len(self._cache) >= 2:
                self._cache.pop(next(iter(self._cache)))
            self._cache[b] = blk
        return blk

    def columns(self, lo: int, hi: int) -> np.ndarray:
        n, N = self.shape
        if not 0 <= lo <= hi <= N:
            raise IndexError(f"column range [{lo}, {hi}) outside [0, {N})")
        if lo == hi:
            return np.zeros((n, 0))
        parts = []
        for b in range(lo // self.block, (hi - 1) // self.block + 1):
            base = b * self.block
            blk = self._block(b)
            parts.append(blk[:, max(lo - base, 0): min(hi - base, blk.shape[1])])
        return parts[0].copy() if len(parts) == 1 else np.hstack(parts)

    def toarray(self) -> np.ndarray:
        return self.columns(0, self.shape[1])
