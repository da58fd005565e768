"""Exact and brute-force reference computations.

These are slow on purpose and serve as ground truth for the randomized
pipeline.  Every routine takes the matrix densely; size caps are enforced.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Union

import numpy as np

from .linalg_core import CsrMatrix, OrthonormalBasis, project_complement
from .sketchkit import RngStream

MAX_DISC_COLS = 22
MAX_HERDISC_COLS = 14
MAX_EXACT_ENTRIES = 10**6
_BLOCK = 1 << 14

MatrixLike = Union[CsrMatrix, np.ndarray]


def _dense(A: MatrixLike) -> np.ndarray:
    return A.toarray() if isinstance(A, CsrMatrix) else np.asarray(A, dtype=np.float64)


@dataclass(frozen=True)
class DiscResult:
    value: float
    witness: np.ndarray


@dataclass(frozen=True)
class BaselineStats:
    median: float
    mean: float
    min: float
    max: float
    trials: int


def disc(A: MatrixLike, x) -> float:
    """``||A x||_inf``."""
    x = np.asarray(x, dtype=np.float64)
    if isinstance(A, CsrMatrix):
        y = A.dot(x)
    else:
        y = np.asarray(A, dtype=np.float64) @ x
    return float(np.max(np.abs(y))) if y.size else 0.0


@lru_cache(maxsize=32)
def _sign_table(k: int) -> np.ndarray:
    """``k x 2^(k-1)`` table of sign vectors with the first coordinate fixed to +1,
    column ``c`` encoding bit ``i-1`` of ``c`` as coordinate ``i``."""
    cols = np.arange(1 << max(k - 1, 0), dtype=np.int64)
    bits = (cols[None, :] >> np.arange(max(k - 1, 0))[:, None]) & 1
    table = np.vstack([np.ones((1, cols.size)), 1.0 - 2.0 * bits])
    table.setflags(write=False)
    return table


def _min_disc(D: np.ndarray):
    """Minimum of ``||D x||_inf`` over sign vectors with ``x_0 = +1``; returns
    ``(value, column index)`` of the first minimiser."""
    m, k = D.shape
    if k == 0:
        return 0.0, 0
    best, arg = math.inf, 0
    total = 1 << (k - 1)
    if k - 1 <= 14:
        vals = np.max(np.abs(D @ _sign_table(k)), axis=0) if m else np.zeros(total)
        i = int(np.argmin(vals))
        return float(vals[i]), i
    for lo in range(0, total, _BLOCK):
        cols = np.arange(lo, min(total, lo + _BLOCK), dtype=np.int64)
        bits = (cols[None, :] >> np.arange(k - 1)[:, None]) & 1
        X = np.vstack([np.ones((1, cols.size)), 1.0 - 2.0 * bits])
        vals = np.max(np.abs(D @ X), axis=0) if m else np.zeros(cols.size)
        i = int(np.argmin(vals))
        if vals[i] < best:
            best, arg = float(vals[i]), lo + i
    return best, arg


def _decode(col: int, k: int) -> np.ndarray:
    x = np.ones(k)
    for i in range(1, k):
        if (col >> (i - 1)) & 1:
            x[i] = -1.0
    return x


def brute_force_disc(A: MatrixLike) -> DiscResult:
    """Exhaustive ``min_x ||A x||_inf`` over ``x in {-1,+1}^n`` (``x`` and ``-x``
    are identified, so ``2^(n-1)`` candidates)."""
    D = _dense(A)
    n = D.shape[1]
    if n > MAX_DISC_COLS:
        raise ValueError(f"brute_force_disc supports n <= {MAX_DISC_COLS}, got {n}")
    if n == 0:
        return DiscResult(0.0, np.zeros(0))
    _, col = _min_disc(D)
    witness = _decode(col, n)
    return DiscResult(disc(D, witness), witness)


def brute_force_herdisc(A: MatrixLike) -> float:
    """``max`` over non-empty column subsets of the exact discrepancy."""
    D = _dense(A)
    n = D.shape[1]
    if n > MAX_HERDISC_COLS:
        raise ValueError(f"brute_force_herdisc supports n <= {MAX_HERDISC_COLS}, got {n}")
    best = 0.0
    for mask in range(1, 1 << n):
        cols = [j for j in range(n) if (mask >> j) & 1]
        val, _ = _min_disc(D[:, cols])
        best = max(best, val)
    return best


def herdisc_eigen_lower_bound(A: MatrixLike, k: int) -> float:
    """``(k / 2e) * sqrt(lambda_k(A^T A) / (m n))``, a lower bound on herdisc."""
    D = _dense(A)
    m, n = D.shape
    if not 1 <= k <= min(m, n):
        raise ValueError(f"k must lie in [1, min(m, n)] = [1, {min(m, n)}]")
    lam = np.linalg.eigvalsh(D.T @ D)[::-1]
    return k / (2 * math.e) * math.sqrt(max(float(lam[k - 1]), 0.0) / (m * n))


def best_eigen_lower_bound(A: MatrixLike) -> float:
    """Best :func:`herdisc_eigen_lower_bound` over all valid ``k``."""
    D = _dense(A)
    m, n = D.shape
    if min(m, n) == 0:
        return 0.0
    lam = np.clip(np.linalg.eigvalsh(D.T @ D)[::-1], 0.0, None)
    ks = np.arange(1, min(m, n) + 1)
    return float(np.max(ks / (2 * math.e) * np.sqrt(lam[: ks.size] / (m * n))))


def exact_leverage_scores(A: MatrixLike, V: OrthonormalBasis = None) -> np.ndarray:
    """Leverage scores ``||e_i^T U||^2`` of ``A (I - V^T V)`` from a full SVD."""
    D = _dense(A)
    m, n = D.shape
    if m * n > MAX_EXACT_ENTRIES:
        raise ValueError("matrix too large for the exact leverage oracle")
    if V is not None and len(V):
        D = project_complement(V, D.T).T
    U, s, _ = np.linalg.svd(D, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros(m)
    rank = int(np.sum(s > max(m, n) * np.finfo(float).eps * s[0]))
    return np.sum(U[:, :rank] ** 2, axis=1)


def random_coloring_baseline(A: MatrixLike, trials: int, rng: RngStream) -> BaselineStats:
    """Discrepancy statistics of uniformly random colorings."""
    if trials < 1:
        raise ValueError("trials must be positive")
    D = _dense(A)
    n = D.shape[1]
    X = rng.generator().choice(np.array([-1.0, 1.0]), size=(n, trials))
    vals = np.max(np.abs(D @ X), axis=0) if D.shape[0] else np.zeros(trials)
    return BaselineStats(float(np.median(vals)), float(np.mean(vals)), float(np.min(vals)),
                         float(np.max(vals)), trials)
