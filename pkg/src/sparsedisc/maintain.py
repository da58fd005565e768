"""Lazy maintenance of ``(I - V^T V) g`` while ``V`` grows by axis vectors.

:class:`MaintainState` serves projected Gaussian columns in amortized
``O(n K)`` work per query/update: the projector ``P`` is refreshed only every
``K`` operations, the next ``K`` columns are pre-projected in one product,
and updates in between are kept as rank-1 corrections ``w_i``.
:func:`slow_maintain` recomputes everything eagerly and is the oracle.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from .linalg_core import OrthonormalBasis, as_dense, orthogonalize, project_complement

UPDATE_DROP_TOL = 1e-10
DEFAULT_BATCH_EXPONENT = 0.529


class BudgetExhausted(RuntimeError):
    """All Gaussian columns have been served."""


def batch_size(n: int, a: float = DEFAULT_BATCH_EXPONENT) -> int:
    return max(1, math.ceil(n**a))


def _columns(G, lo: int, hi: int) -> np.ndarray:
    if isinstance(G, np.ndarray):
        return G[:, lo:hi]
    return G.columns(lo, hi)


def _axis_index(u, n: int) -> int:
    if isinstance(u, (int, np.integer)):
        if not 0 <= u < n:
            raise ValueError(f"coordinate {u} out of range")
        return int(u)
    u = np.asarray(u, dtype=np.float64)
    nz = np.flatnonzero(u)
    if u.shape != (n,) or nz.size != 1 or u[nz[0]] != 1.0:
        raise ValueError("update vector must be a standard basis vector e_i")
    return int(nz[0])


class MaintainState:
    """Batched lazy projector.

    Counters: ``k_u`` pending corrections, ``k_q`` columns served from the
    current window, ``tau_q`` columns served overall.  ``ops`` accumulates
    the multiply-adds spent in queries and updates (restarts excluded);
    ``last_op_cost`` holds the cost of the most recent one.
    """

    def __init__(self, V: OrthonormalBasis, G, K: int):
        n, N = G.shape
        if V.n != n:
            raise ValueError(f"dimension mismatch: V.n={V.n}, G has {n} rows")
        if N < 1 or not 1 <= K <= N:
            raise ValueError("need N >= 1 and 1 <= K <= N")
        self.n, self.N, self.K = n, N, int(K)
        self.G = G if not isinstance(G, np.ndarray) else as_dense(G, "G")
        W = V.rows
        self.P = W.T @ W if len(V) else np.zeros((n, n))
        self.W = np.zeros((self.K, n))
        self.k_u = 0
        self.k_q = 0
        self.tau_q = 0
        self.restarts = 0
        self.ops = 0
        self.last_op_cost = 0
        self._load_window()

    def _load_window(self) -> None:
        hi = min(self.N, self.tau_q + self.K)
        self._window = _columns(self.G, self.tau_q, hi)
        self.G_tilde = self.P @ self._window

    def query(self) -> np.ndarray:
        """Next projected Gaussian column ``(I - V^T V) g``."""
        if self.tau_q >= self.N:
            raise BudgetExhausted("all Gaussian columns have been consumed")
        if self.k_q >= self.G_tilde.shape[1]:
            self.restart()
        j = self.k_q
        g = self._window[:, j]
        out = g - self.G_tilde[:, j]
        if self.k_u:
            W = self.W[: self.k_u]
            out -= W.T @ (W @ g)
        self.k_q += 1
        self.tau_q += 1
        self.last_op_cost = 2 * self.n * self.k_u + 2 * self.n
        self.ops += self.last_op_cost
        return out

    def update(self, u) -> bool:
        """Absorb ``e_i`` into the span.  Returns False when ``e_i`` was
        already (numerically) in the span and nothing was stored."""
        i = _axis_index(u, self.n)
        w = -self.P[:, i].copy()
        w[i] += 1.0
        if self.k_u:
            W = self.W[: self.k_u]
            w -= W.T @ W[:, i]
        norm = float(np.linalg.norm(w))
        self.last_op_cost = self.n * self.k_u + 3 * self.n
        self.ops += self.last_op_cost
        if norm <= UPDATE_DROP_TOL:
            return False
        self.W[self.k_u] = w / norm
        self.k_u += 1
        if self.k_u >= self.K:
            self.restart()
        return True

    def restart(self) -> None:
        """Fold pending corrections into ``P`` and pre-project a fresh window
        starting at the next unserved column."""
        if self.k_u:
            W = self.W[: self.k_u]
            P = self.P + W.T @ W
            self.P = np.triu(P) + np.triu(P, 1).T
        self.W[:] = 0.0
        self.k_u = 0
        self.k_q = 0
        self.restarts += 1
        if self.tau_q < self.N:
            self._load_window()
        else:
            self._window = np.zeros((self.n, 0))
            self.G_tilde = self._window


class EagerProjector:
    """Drop-in replacement for :class:`MaintainState` that keeps ``V``
    explicitly and re-projects every column."""

    def __init__(self, V: OrthonormalBasis, G):
        self.V = V.copy()
        self.G = G
        self.n, self.N = G.shape
        self.tau_q = 0

    def query(self) -> np.ndarray:
        if self.tau_q >= self.N:
            raise BudgetExhausted("all Gaussian columns have been consumed")
        g = _columns(self.G, self.tau_q, self.tau_q + 1)[:, 0]
        self.tau_q += 1
        return project_complement(self.V, g)

    def update(self, u) -> bool:
        before = len(self.V)
        e = np.zeros(self.n)
        e[_axis_index(u, self.n)] = 1.0
        orthogonalize(e, self.V)
        return len(self.V) > before


def ds_init(V: OrthonormalBasis, G, K: int) -> MaintainState:
    return MaintainState(V, G, K)


def ds_query(st: MaintainState) -> np.ndarray:
    return st.query()


def ds_update(st: MaintainState, u) -> bool:
    return st.update(u)


def ds_restart(st: MaintainState) -> None:
    st.restart()


def _check_schedule(b, G):
    b = np.asarray(b)
    n, N = G.shape
    if b.shape != (n, N):
        raise ValueError(f"schedule shape {b.shape} does not match G {G.shape}")
    return b.astype(bool)


def fast_maintain(b, G, K: int, V: Optional[OrthonormalBasis] = None) -> np.ndarray:
    """Serve all ``N`` columns through :class:`MaintainState`, absorbing
    ``e_i`` after query ``t`` whenever ``b[i, t]`` is set.  Returns ``N x n``."""
    b = _check_schedule(b, G)
    n, N = G.shape
    st = MaintainState(V if V is not None else OrthonormalBasis(n), G, K)
    out = np.empty((N, n))
    for t in range(N):
        out[t] = st.query()
        for i in np.flatnonzero(b[:, t]):
            st.update(int(i))
    return out


def slow_maintain(b, G, V: Optional[OrthonormalBasis] = None) -> np.ndarray:
    """Eager reference for :func:`fast_maintain`; ``V`` is grown by
    Gram-Schmidt after every query.  Returns ``N x n``."""
    b = _check_schedule(b, G)
    n, N = G.shape
    V = V.copy() if V is not None else OrthonormalBasis(n)
    Gd = _columns(G, 0, N)
    out = np.empty((N, n))
    for t in range(N):
        out[t] = project_complement(V, Gd[:, t])
        for i in np.flatnonzero(b[:, t]):
            e = np.zeros(n)
            e[i] = 1.0
            orthogonalize(e, V)
    return out
