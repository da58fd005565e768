"""Implicit leverage scores of ``A (I - V^T V)`` and leverage-score row sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linalg_core import CHUNK_ELEMS, CsrMatrix, OrthonormalBasis, project_complement, qr_r_factor, triangular_pinv
from .sketchkit import RngStream, SketchKind, make_sketch, sparse_embed_left

# Sketch sizes: s1 = LEV_ROWS_CONSTANT * eps^-2 * n rows with column sparsity
# LEV_SPARSITY_CONSTANT * eps^-1 * ln(n / delta); s2 = LEV_JL_CONSTANT *
# eps^-2 * ln(m / delta) Gaussian columns.
LEV_ROWS_CONSTANT = 16.0
LEV_SPARSITY_CONSTANT = 2.0
LEV_JL_CONSTANT = 16.0
SAMPLE_CONSTANT = 8.0
PROB_FLOOR = 1e-15
SUBSAMPLE_EPS_SIGMA = 1.0 / 3.0


@dataclass
class LeverageEstimate:
    scores: np.ndarray
    epsilon: float
    delta: float


@dataclass
class SamplingMatrix:
    """Diagonal sampling matrix built from ``T`` draws with replacement.

    Draws are kept aggregated: ``rows[k]`` was drawn ``counts[k]`` times with
    probability ``probs[k]``.  Each draw contributes an entry of weight
    ``1 / sqrt(T p_j)``; :attr:`entries` expands them one per draw.
    """

    rows: np.ndarray
    counts: np.ndarray
    probs: np.ndarray
    trials: int
    source_rows: int

    @property
    def nnz(self) -> int:
        return int(self.counts.sum())

    @property
    def draw_weights(self) -> np.ndarray:
        return 1.0 / np.sqrt(self.trials * self.probs)

    @property
    def entries(self):
        """``(row_index, weight)`` arrays with one entry per draw."""
        return np.repeat(self.rows, self.counts), np.repeat(self.draw_weights, self.counts)

    @property
    def gram_weights(self) -> np.ndarray:
        """Per distinct row, the total squared weight ``count / (T p_j)``."""
        return self.counts / (self.trials * self.probs)


def sample_count(beta: float, eps: float, n: int, delta: float, c: float = SAMPLE_CONSTANT) -> int:
    """``T = ceil(c * beta * eps^-2 * n * ln(2n / delta))``."""
    return max(1, math.ceil(c * beta * n * math.log(2 * max(n, 1) / delta) / eps**2))


def implicit_leverage_scores(A: CsrMatrix, V: OrthonormalBasis, eps_sigma: float,
                             delta_sigma: float, rng: RngStream) -> LeverageEstimate:
    """Estimate the leverage scores of ``A (I - V^T V)`` without forming it.

    Sparse-embed the rows, take the pivoted R factor of the projected sketch,
    and read each score off as a JL-compressed row norm of ``A (I-P) R^+``.
    """
    if A.n_cols != V.n:
        raise ValueError(f"dimension mismatch: A has {A.n_cols} columns, V.n={V.n}")
    if not 0 < eps_sigma <= 0.5:
        raise ValueError("eps_sigma must lie in (0, 0.5]")
    m, n = A.shape
    s1 = max(n, math.ceil(LEV_ROWS_CONSTANT * n / eps_sigma**2))
    sparsity = min(s1, math.ceil(LEV_SPARSITY_CONSTANT * math.log(max(n, 2) / delta_sigma) / eps_sigma))
    SA = sparse_embed_left(A, s1, sparsity, rng.child("S1"))
    SA = SA[np.any(SA != 0.0, axis=1)]  # empty rows do not change R
    M = project_complement(V, SA.T).T
    if M.shape[0] == 0:
        return LeverageEstimate(np.zeros(m), eps_sigma, delta_sigma)
    R, perm = qr_r_factor(M, pivoting=True)
    X = triangular_pinv(R, perm)
    rank = X.shape[1]
    if rank == 0:
        return LeverageEstimate(np.zeros(m), eps_sigma, delta_sigma)
    s2 = max(1, math.ceil(LEV_JL_CONSTANT * math.log(max(m, 2) / delta_sigma) / eps_sigma**2))
    S2 = make_sketch(SketchKind.GAUSSIAN, s2, rank, rng=rng.child("S2"))
    N = project_complement(V, X @ S2.dense().T)
    scores = np.empty(m)
    for lo, hi in A.row_chunks(s2):
        block = A.scipy[lo:hi] @ N
        scores[lo:hi] = np.einsum("ij,ij->i", block, block)
    return LeverageEstimate(scores, eps_sigma, delta_sigma)


def chernoff_row_sample(probabilities, beta: float, eps0: float, delta0: float, n: int,
                        rng: RngStream) -> SamplingMatrix:
    """Draw ``T`` rows i.i.d. with replacement according to ``probabilities``.

    ``beta >= 1`` is the oversampling slack: the caller guarantees
    ``p_j >= sigma_j / (beta n)``, and ``T`` grows linearly in ``beta``.
    """
    p = np.asarray(probabilities, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("probabilities must be a non-empty vector")
    if not np.all(np.isfinite(p)) or np.any(p <= 0.0):
        raise ValueError("probabilities must be positive")
    if beta < 1.0:
        raise ValueError("beta must be at least 1")
    p = p / p.sum()
    T = sample_count(beta, eps0, n, delta0)
    counts = rng.generator().multinomial(T, p)
    hit = np.flatnonzero(counts)
    return SamplingMatrix(hit, counts[hit], p[hit], T, p.size)


def sampled_gram(A: CsrMatrix, V: OrthonormalBasis, D: SamplingMatrix) -> np.ndarray:
    """``B~^T B~`` for ``B~ = D A (I - V^T V)``, via a sparse ``n x n`` product."""
    if D.source_rows != A.n_rows:
        raise ValueError("sampling matrix does not match A")
    n = A.n_cols
    H = np.zeros((n, n))
    mat = A.scipy
    w = np.sqrt(D.gram_weights)
    step = max(1, CHUNK_ELEMS // max(n, 1))
    for lo in range(0, D.rows.size, step):
        B = mat[D.rows[lo:lo + step]].toarray()
        B *= w[lo:lo + step, None]
        H += B.T @ B
    if len(V):
        H = project_complement(V, H)
        H = project_complement(V, H.T)
        H = (H + H.T) / 2.0
    return H


def subsample(A_selected: CsrMatrix, V: OrthonormalBasis, eps_B: float, delta_B: float,
              rng: RngStream) -> SamplingMatrix:
    """Leverage-score sampling of ``A_selected (I - V^T V)`` to a
    ``(1 +- eps_B)`` spectral approximation."""
    if not 0 < eps_B < 0.5:
        raise ValueError("eps_B must lie in (0, 0.5)")
    est = implicit_leverage_scores(A_selected, V, SUBSAMPLE_EPS_SIGMA, delta_B, rng.child("leverage"))
    beta = (1 + SUBSAMPLE_EPS_SIGMA) / (1 - SUBSAMPLE_EPS_SIGMA)
    p = np.maximum(est.scores, PROB_FLOOR)
    return chernoff_row_sample(p, beta, eps_B, delta_B, A_selected.n_cols, rng.child("sample"))
