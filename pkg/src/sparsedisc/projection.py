"""Projecting a matrix onto a complement where every row is short.

:func:`fast_project_to_small_rows` grows an orthonormal ``V`` (at most
``n/4`` rows) so that all rows of ``A (I - V^T V)`` have norm
``O(herdisc(A) log(m/n))``.  Each round keeps the heaviest half of the rows
(ranked by JL-sketched norms), spectrally sparsifies them by leverage-score
sampling and absorbs the top eigenvectors of the sampled Gram matrix.
:func:`slow_project_to_small_rows` runs the same schedule with exact norms
and exact Gram matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List

import numpy as np

from .leverage import sampled_gram, subsample
from .linalg_core import (
    CsrMatrix,
    OrthonormalBasis,
    orthogonalize,
    residual_rows,
    row_norms_exact,
    sym_eig_desc,
)
from .sketchkit import RngStream, SketchKind, jl_row_norms, make_sketch

EIG_REL_TOL = 1e-12


@dataclass
class ProjectionConfig:
    C0: float = 1000.0
    eps0: float = 0.01
    epsB: float = 0.1
    delta: float = 0.01
    # Scales r = eps0^-2 ln(1/delta0); 0.01 keeps the JL width in the
    # low thousands at the default eps0.
    jl_rows_constant: float = 0.01
    delta0_share: float = 0.25
    deltaB_share: float = 0.25

    def __post_init__(self):
        if not 0 < self.eps0 <= 0.05:
            raise ValueError("eps0 must lie in (0, 0.05]")
        if not 0 < self.epsB < 0.5:
            raise ValueError("epsB must lie in (0, 0.5)")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.jl_rows_constant <= 0:
            raise ValueError("jl_rows_constant must be positive")


@dataclass
class RoundStats:
    m_t: int
    l_t: int
    rows_selected: int
    subsample_size: int


@dataclass
class ProjectionResult:
    V: OrthonormalBasis
    iterations: int
    per_round_stats: List[RoundStats] = field(default_factory=list)
    finale_rows: int = 0

    def rows_after_round(self, t: int) -> int:
        """Number of rows of ``V`` after round ``t`` (``t = 0`` means none)."""
        return 0 if t == 0 else self.per_round_stats[t - 1].l_t


@dataclass(frozen=True)
class Schedule:
    T: int
    m_eff: int
    per_round: int
    budget: int

    @classmethod
    def for_shape(cls, m: int, n: int) -> "Schedule":
        m_eff = max(m, n)
        T = max(1, math.ceil(math.log2(8 * m_eff / n)))
        budget = n // 8
        return cls(T, m_eff, math.ceil(budget / T) if budget else 0, budget)

    def keep(self, t: int) -> int:
        """Rows kept in round ``t`` (1-based): ``ceil(m / 2^(t-1))``."""
        return math.ceil(self.m_eff / 2 ** (t - 1))


def _check_input(A: CsrMatrix) -> None:
    m, n = A.shape
    if n < 8:
        raise ValueError(f"projection needs n >= 8 columns, got {n}")
    if m < 1:
        raise ValueError("matrix has no rows")


def _top_rows(norms: np.ndarray, k: int) -> np.ndarray:
    """Indices of the ``k`` largest norms; ties broken by lower index."""
    order = np.argsort(-norms, kind="stable")
    return np.sort(order[:k])


def _absorb_eigenvectors(V: OrthonormalBasis, H: np.ndarray, k: int) -> None:
    if k <= 0:
        return
    w, U = sym_eig_desc(H)
    if w.size == 0 or w[0] <= 0.0:
        return
    for lam, u in zip(w[:k], U.rows[:k]):
        if lam <= EIG_REL_TOL * w[0]:
            break
        orthogonalize(u, V)


def _finale(A: CsrMatrix, V: OrthonormalBasis, k: int) -> int:
    """Orthogonalize the ``k`` heaviest residual rows into ``V``."""
    if k <= 0:
        return 0
    before = len(V)
    norms = row_norms_exact(A, V)
    idx = np.argsort(-norms, kind="stable")[: min(k, A.n_rows)]
    for r in residual_rows(A, V, idx):
        orthogonalize(r, V)
    return len(V) - before


def fast_project_to_small_rows(A: CsrMatrix, cfg: ProjectionConfig = None,
                               rng: RngStream = None) -> ProjectionResult:
    """Randomized projection in input-sparsity time.

    No dense ``m x n`` array is allocated: sketched norms are computed in row
    chunks and the sampled Gram matrix through a sparse product.
    """
    cfg = cfg or ProjectionConfig()
    rng = rng or RngStream(0)
    _check_input(A)
    m, n = A.shape
    sch = Schedule.for_shape(m, n)
    delta0 = cfg.delta0_share * cfg.delta / (sch.m_eff * sch.T)
    deltaB = cfg.deltaB_share * cfg.delta / sch.T
    r = max(1, math.ceil(cfg.jl_rows_constant * math.log(1.0 / delta0) / cfg.eps0**2))

    V = OrthonormalBasis(n)
    stats = []
    for t in range(1, sch.T + 1):
        keep = min(sch.keep(t), m)
        R = make_sketch(SketchKind.GAUSSIAN, r, n, rng=rng.child("jl", t))
        idx = _top_rows(jl_row_norms(A, V, R), keep)
        A_sel = A.select_rows(idx)
        D = subsample(A_sel, V, cfg.epsB, deltaB, rng.child("subsample", t))
        H = sampled_gram(A_sel, V, D)
        k = min(sch.per_round, sch.budget - len(V))
        _absorb_eigenvectors(V, H, k)
        stats.append(RoundStats(keep, len(V), keep, D.nnz))
    added = _finale(A, V, sch.budget)
    return ProjectionResult(V, sch.T, stats, added)


def slow_project_to_small_rows(A: CsrMatrix, cfg: ProjectionConfig = None) -> ProjectionResult:
    """Deterministic reference: exact residual norms and exact Gram matrices."""
    cfg = cfg or ProjectionConfig()
    _check_input(A)
    m, n = A.shape
    sch = Schedule.for_shape(m, n)
    V = OrthonormalBasis(n)
    stats = []
    for t in range(1, sch.T + 1):
        keep = min(sch.keep(t), m)
        idx = _top_rows(row_norms_exact(A, V), keep)
        B = residual_rows(A, V, idx)
        H = B.T @ B
        k = min(sch.per_round, sch.budget - len(V))
        _absorb_eigenvectors(V, (H + H.T) / 2.0, k)
        stats.append(RoundStats(keep, len(V), keep, keep))
    added = _finale(A, V, sch.budget)
    return ProjectionResult(V, sch.T, stats, added)


def max_residual_norm(A: CsrMatrix, V: OrthonormalBasis) -> float:
    norms = row_norms_exact(A, V)
    return float(norms.max()) if norms.size else 0.0

