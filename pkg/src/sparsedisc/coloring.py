"""Partial coloring by a projected Gaussian walk, and the full-coloring driver.

Each partial-coloring call first projects away the heavy directions of ``A``
(so every row of ``A (I - V^T V)`` is short), then runs a random walk inside
the box ``[-1, 1]^n`` whose steps are Gaussians projected off ``V`` and off
the coordinates already frozen at ``+-1``.  Once half the coordinates are
frozen the walk stops and checks ``||A u||_inf <= beta``.
:func:`fast_hereditary_minimize` repeats this on the still-alive columns
until every coordinate is a sign.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .linalg_core import CsrMatrix, OrthonormalBasis, row_norms_exact
from .maintain import DEFAULT_BATCH_EXPONENT, EagerProjector, MaintainState, batch_size
from .projection import ProjectionConfig, fast_project_to_small_rows, slow_project_to_small_rows
from .sketchkit import GaussianColumns, RngStream, SketchKind, jl_row_norms, make_sketch

BETA_FLOOR = 1e-12
SNAP_TOL = 1e-12
BOX_TOL = 1e-12
MIN_PROJECTION_COLS = 8


@dataclass
class ColoringConfig:
    """Walk parameters.

    ``delta`` is the failure probability used for ``beta`` when
    :func:`fast_partial_coloring` is called directly; the driver passes
    ``delta_final^3 / n^3`` instead.
    """

    delta_final: float = 1e-3
    delta: float = 0.01
    eps1: float = 0.1
    batch_exponent: float = DEFAULT_BATCH_EXPONENT
    c_eps: float = 1.0
    c_N: float = 1.0
    c_beta: float = 100.0
    c_retry: float = 10.0
    mode: str = "fast"
    projection: ProjectionConfig = field(default_factory=ProjectionConfig)

    def __post_init__(self):
        if not 0 < self.delta_final <= 1e-3:
            raise ValueError("delta_final must lie in (0, 0.001]")
        if not 0 < self.delta <= 0.01:
            raise ValueError("delta must lie in (0, 0.01]")
        if not 0 < self.eps1 <= 0.1:
            raise ValueError("eps1 must lie in (0, 0.1]")
        if not 0 <= self.batch_exponent <= 1:
            raise ValueError("batch_exponent must lie in [0, 1]")
        if self.c_eps <= 0 or self.c_N <= 0 or self.c_retry <= 0:
            raise ValueError("schedule constants must be positive")
        if self.c_beta < 1:
            raise ValueError("c_beta must be at least 1")
        if self.mode not in ("fast", "slow"):
            raise ValueError("mode must be 'fast' or 'slow'")


class Outcome(enum.Enum):
    SUCCESS = "success"
    FAIL_BETA_EXCEEDED = "fail_beta_exceeded"
    FAIL_INSUFFICIENT_FREEZE = "fail_insufficient_freeze"


@dataclass
class PartialColoringOutcome:
    kind: Outcome
    x_new: Optional[np.ndarray]
    beta: float
    eta: float
    eps: float
    N: int
    K: int
    iterations: int
    frozen: int
    max_abs_Au: float
    """``||A u||_inf`` at termination; NaN if the walk ran out of steps."""

    @property
    def success(self) -> bool:
        return self.kind is Outcome.SUCCESS


@dataclass
class ColoringResult:
    x: Optional[np.ndarray]
    outer_rounds: int
    retries_per_round: List[int]
    last: Optional[PartialColoringOutcome]

    @property
    def success(self) -> bool:
        return self.x is not None


def walk_step_size(m: int, n: int, c_eps: float = 1.0) -> float:
    """``eps = c_eps (ln(mn) + n)^(-1/2)``."""
    return c_eps / math.sqrt(math.log(m * n) + n)


def walk_length(eps: float, n: int, c_N: float = 1.0) -> int:
    """``N = ceil(c_N (16 eps^-2 + 400 n))``."""
    return math.ceil(c_N * (16.0 / eps**2 + 400.0 * n))


def slab_width(eps: float, eta_env: float, N: int, m: int, delta: float, c_beta: float = 100.0) -> float:
    """``beta = c_beta eps eta sqrt(N ln(m / delta))``, floored at 1e-12."""
    return max(c_beta * eps * eta_env * math.sqrt(N * math.log(m / delta)), BETA_FLOOR)


def fast_approx_max_norm(A: CsrMatrix, V: OrthonormalBasis, eps1: float, delta2: float,
                         rng: RngStream) -> float:
    """JL estimate of ``max_j ||a_j^T (I - V^T V)||`` with
    ``r = ceil(eps1^-2 ln(m / delta2))`` Gaussian columns."""
    if A.n_cols != V.n:
        raise ValueError(f"dimension mismatch: A has {A.n_cols} columns, V.n={V.n}")
    if not 0 < eps1 <= 0.1:
        raise ValueError("eps1 must lie in (0, 0.1]")
    m = A.n_rows
    r = max(1, math.ceil(math.log(max(m, 2) / delta2) / eps1**2))
    S = make_sketch(SketchKind.GAUSSIAN, r, A.n_cols, rng=rng)
    norms = jl_row_norms(A, V, S)
    return float(norms.max()) if norms.size else 0.0


def find_boundary(g, b) -> Optional[float]:
    """Largest-magnitude ``mu`` with ``max(||mu g + b||_inf, ||mu g - b||_inf) = 1``.

    Intersects the per-coordinate intervals of ``-1 <= mu g_i +- b_i <= 1``
    into ``[lo, hi]`` and returns the endpoint of larger magnitude (``hi`` on
    ties).  Returns None when the intersection is empty.  Coordinates with
    ``g_i = 0`` only require ``|b_i| <= 1``.
    """
    g = np.asarray(g, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if g.shape != b.shape or g.ndim != 1:
        raise ValueError("g and b must be vectors of equal length")
    zero = g == 0.0
    if np.any(np.abs(b[zero]) > 1.0):
        return None
    gz, bz = g[~zero], b[~zero]
    if gz.size == 0:
        return math.inf
    ends = np.stack([(bz - 1) / gz, (bz + 1) / gz, (-bz - 1) / gz, (1 - bz) / gz])
    lo = max(np.minimum(ends[0], ends[1]).max(), np.minimum(ends[2], ends[3]).max())
    hi = min(np.maximum(ends[0], ends[1]).min(), np.maximum(ends[2], ends[3]).min())
    if lo > hi:
        return None
    return float(hi) if abs(lo) <= abs(hi) else float(lo)


def _check_x(x, n: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (n,):
        raise ValueError(f"x must have length {n}")
    if np.any(np.abs(x) >= 1.0):
        raise ValueError("every |x_i| must be < 1")
    return x


def fast_partial_coloring(A: CsrMatrix, x, cfg: ColoringConfig = None, rng: RngStream = None,
                          delta: Optional[float] = None) -> PartialColoringOutcome:
    """One attempt at freezing half of the coordinates of ``x``.

    ``cfg.mode == "slow"`` swaps in the deterministic projection, the exact
    row-norm maximum and the eagerly re-projecting maintainer.
    """
    cfg = cfg or ColoringConfig()
    rng = rng or RngStream(0)
    m, n = A.shape
    if m < 1 or n < 1:
        raise ValueError("A must have at least one row and one column")
    x = _check_x(x, n)
    delta = cfg.delta if delta is None else delta
    slow = cfg.mode == "slow"

    delta12 = cfg.delta_final**2 / n**2
    if n >= MIN_PROJECTION_COLS:
        pcfg = ProjectionConfig(**{**cfg.projection.__dict__, "delta": delta12})
        if slow:
            V = slow_project_to_small_rows(A, pcfg).V
        else:
            V = fast_project_to_small_rows(A, pcfg, rng.child("project")).V
    else:
        V = OrthonormalBasis(n)

    if slow:
        norms = row_norms_exact(A, V)
        eta = float(norms.max()) if norms.size else 0.0
        eta_env = eta
    else:
        eta = fast_approx_max_norm(A, V, cfg.eps1, delta12, rng.child("eta"))
        eta_env = eta / (1.0 - cfg.eps1)

    eps = walk_step_size(m, n, cfg.c_eps)
    N = walk_length(eps, n, cfg.c_N)
    beta = slab_width(eps, eta_env, N, m, delta, cfg.c_beta)
    G = GaussianColumns(n, N, rng.child("gauss"))
    K = min(batch_size(n, cfg.batch_exponent), N)
    ds = EagerProjector(V, G) if slow else MaintainState(V, G, K)

    pos = x.copy()
    frozen = np.zeros(n, dtype=bool)
    need = n / 2.0
    for t in range(1, N + 1):
        g = ds.query()
        g[frozen] = 0.0
        mu = find_boundary(g, pos)
        if mu is None:
            raise RuntimeError("walk left the box")
        step = min(eps, mu)
        new = pos + step * g
        if mu <= eps:
            hit = ~frozen & (np.abs(new) >= 1.0 - SNAP_TOL)
            new[hit] = np.sign(new[hit])
        new[frozen] = pos[frozen]
        if np.max(np.abs(new)) > 1.0 + BOX_TOL:
            raise RuntimeError("box invariant violated")
        newly = np.flatnonzero(~frozen & (np.abs(new) == 1.0))
        for i in newly:
            ds.update(int(i))
        frozen[newly] = True
        pos = new
        if frozen.sum() >= need:
            au = float(np.max(np.abs(A.dot(pos - x))))
            kind = Outcome.FAIL_BETA_EXCEEDED if au > beta else Outcome.SUCCESS
            return PartialColoringOutcome(kind, pos if kind is Outcome.SUCCESS else None, beta,
                                          eta, eps, N, K, t, int(frozen.sum()), au)
    return PartialColoringOutcome(Outcome.FAIL_INSUFFICIENT_FREEZE, None, beta, eta, eps, N, K,
                                  N, int(frozen.sum()), math.nan)


def retry_budget(n: int, delta_final: float, c_retry: float = 10.0) -> int:
    """``k = ceil(c_retry ln(n / delta_final))`` attempts per outer round."""
    return max(1, math.ceil(c_retry * math.log(n / delta_final)))


def fast_hereditary_minimize(A: CsrMatrix, cfg: ColoringConfig = None,
                             rng: RngStream = None) -> ColoringResult:
    """Full coloring ``x in {-1, +1}^n`` by repeated partial coloring.

    Returns a result with ``x = None`` if some outer round exhausts its
    retries.
    """
    cfg = cfg or ColoringConfig()
    rng = rng or RngStream(0)
    m, n = A.shape
    if m < 1 or n < 1:
        raise ValueError("A must have at least one row and one column")
    k = retry_budget(n, cfg.delta_final, cfg.c_retry)
    delta = cfg.delta_final**3 / n**3
    x = np.zeros(n)
    retries: List[int] = []
    last = None
    rnd = 0
    while True:
        alive = np.flatnonzero(np.abs(x) < 1.0)
        if alive.size == 0:
            return ColoringResult(x, rnd, retries, last)
        rnd += 1
        A_s = A.select_columns(alive)
        for c in range(k):
            last = fast_partial_coloring(A_s, x[alive], cfg, rng.child("round", rnd, "try", c), delta)
            if last.success:
                x[alive] = last.x_new
                retries.append(c + 1)
                break
        else:
            retries.append(k)
            return ColoringResult(None, rnd, retries, last)
