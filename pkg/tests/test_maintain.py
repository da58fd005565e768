import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sparsedisc.linalg_core import OrthonormalBasis
from sparsedisc.maintain import (
    BudgetExhausted,
    EagerProjector,
    MaintainState,
    batch_size,
    ds_init,
    ds_query,
    ds_restart,
    ds_update,
    fast_maintain,
    slow_maintain,
)
from sparsedisc.sketchkit import GaussianColumns, RngStream

from conftest import random_basis


def gaussians(n, N, seed):
    return np.random.default_rng(seed).standard_normal((n, N))


def random_schedule(n, N, seed, rate=0.4):
    gen = np.random.default_rng(seed)
    b = np.zeros((n, N), dtype=bool)
    for t in range(N):
        if gen.random() < rate:
            b[gen.integers(n), t] = True
    return b


class TestInit:
    def test_empty_basis(self):
        st_ = ds_init(OrthonormalBasis(6), gaussians(6, 10, 0), 3)
        assert np.all(st_.P == 0) and np.all(st_.G_tilde == 0)
        assert (st_.k_u, st_.k_q, st_.tau_q) == (0, 0, 0)

    def test_full_basis(self):
        G = gaussians(5, 8, 1)
        st_ = ds_init(OrthonormalBasis(5, np.eye(5)), G, 4)
        np.testing.assert_array_equal(st_.P, np.eye(5))
        np.testing.assert_array_equal(st_.G_tilde, G[:, :4])

    def test_random_basis_projector(self):
        V = random_basis(20, 6, 2)
        st_ = ds_init(V, gaussians(20, 30, 2), 5)
        assert np.max(np.abs(st_.P - V.rows.T @ V.rows)) == 0
        assert np.max(np.abs(st_.P @ st_.P - st_.P)) <= 1e-9

    def test_errors(self):
        with pytest.raises(ValueError):
            ds_init(OrthonormalBasis(4), gaussians(5, 8, 0), 2)
        with pytest.raises(ValueError):
            ds_init(OrthonormalBasis(5), gaussians(5, 8, 0), 9)
        with pytest.raises(ValueError):
            ds_init(OrthonormalBasis(5), gaussians(5, 8, 0), 0)


class TestQueryUpdate:
    def test_first_query_verbatim(self):
        G = gaussians(4, 6, 3)
        st_ = ds_init(OrthonormalBasis(4), G, 2)
        np.testing.assert_array_equal(ds_query(st_), G[:, 0])

    def test_frozen_coordinate_annihilated(self):
        st_ = ds_init(random_basis(8, 2, 1), gaussians(8, 20, 4), 3)
        e3 = np.zeros(8)
        e3[3] = 1.0
        ds_update(st_, e3)
        for _ in range(10):
            assert abs(ds_query(st_)[3]) <= 1e-10

    def test_first_update_stores_axis(self):
        st_ = ds_init(OrthonormalBasis(5), gaussians(5, 6, 0), 3)
        assert ds_update(st_, 1)
        np.testing.assert_array_equal(st_.W[0], np.eye(5)[1])

    def test_redundant_update_skipped(self):
        st_ = ds_init(OrthonormalBasis(5), gaussians(5, 6, 0), 3)
        assert ds_update(st_, 0)
        assert not ds_update(st_, 0)
        assert st_.k_u == 1

    def test_stored_w_orthogonal_to_prior_basis(self):
        V = random_basis(16, 5, 9)
        st_ = ds_init(V, gaussians(16, 40, 9), 8)
        for i in (0, 3, 7):
            ds_update(st_, i)
        W = st_.W[: st_.k_u]
        assert np.max(np.abs(W @ V.rows.T)) <= 1e-8
        assert np.max(np.abs(W @ W.T - np.eye(st_.k_u))) <= 1e-8

    def test_non_axis_update_rejected(self):
        st_ = ds_init(OrthonormalBasis(3), gaussians(3, 4, 0), 2)
        with pytest.raises(ValueError):
            ds_update(st_, np.array([1.0, 1.0, 0.0]))
        with pytest.raises(ValueError):
            ds_update(st_, np.array([0.0, 2.0, 0.0]))
        with pytest.raises(ValueError):
            ds_update(st_, 3)

    def test_budget_exhausted(self):
        st_ = ds_init(OrthonormalBasis(3), gaussians(3, 2, 0), 1)
        ds_query(st_)
        ds_query(st_)
        with pytest.raises(BudgetExhausted):
            ds_query(st_)


class TestRestart:
    def test_no_pending_keeps_projector(self):
        V = random_basis(6, 2, 0)
        st_ = ds_init(V, gaussians(6, 12, 0), 3)
        P = st_.P.copy()
        ds_query(st_)
        ds_restart(st_)
        np.testing.assert_array_equal(st_.P, P)
        assert st_.G_tilde.shape[1] == 3

    def test_one_pending_update(self):
        V = random_basis(6, 2, 1)
        st_ = ds_init(V, gaussians(6, 12, 1), 3)
        ds_update(st_, 2)
        w = st_.W[0].copy()
        P = st_.P.copy()
        ds_restart(st_)
        np.testing.assert_allclose(st_.P, P + np.outer(w, w), atol=1e-15)
        assert np.max(np.abs(st_.P @ st_.P - st_.P)) <= 1e-9
        assert np.max(np.abs(st_.P - st_.P.T)) == 0

    def test_next_query_matches_slow_after_restart(self):
        n, N = 8, 12
        G = gaussians(n, N, 5)
        b = np.zeros((n, N), dtype=bool)
        b[1, 0] = b[4, 0] = True
        st_ = ds_init(OrthonormalBasis(n), G, 2)
        ds_query(st_)
        ds_update(st_, 1)
        ds_update(st_, 4)  # k_u hits K: restart
        assert st_.restarts == 1
        np.testing.assert_allclose(ds_query(st_), slow_maintain(b, G)[1], atol=1e-12)


class TestSlowMaintain:
    def test_no_updates(self):
        V = random_basis(6, 2, 3)
        G = gaussians(6, 5, 3)
        out = slow_maintain(np.zeros((6, 5)), G, V)
        np.testing.assert_allclose(out, ((np.eye(6) - V.projector()) @ G).T, atol=1e-12)

    def test_freeze_everything(self):
        G = gaussians(4, 6, 0)
        b = np.zeros((4, 6), dtype=bool)
        b[:, 0] = True
        out = slow_maintain(b, G)
        np.testing.assert_allclose(out[1:], 0.0, atol=1e-9)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            slow_maintain(np.zeros((3, 4)), gaussians(3, 5, 0))


@settings(max_examples=60, deadline=None)
@given(st.sampled_from([8, 16, 32]), st.integers(0, 2**32 - 1), st.data())
def test_fast_equals_slow(n, seed, data):
    N = 3 * n
    K = data.draw(st.sampled_from(sorted({1, 2, math.ceil(math.sqrt(n)), n})))
    G = gaussians(n, N, seed)
    b = random_schedule(n, N, seed, rate=data.draw(st.floats(0.0, 1.0)))
    V = random_basis(n, data.draw(st.integers(0, n // 4)), seed)
    fast = fast_maintain(b, G, K, V)
    slow = slow_maintain(b, G, V)
    assert np.max(np.abs(fast - slow)) <= 1e-9 * (1 + np.max(np.abs(G)))


def test_projector_algebra_at_every_restart():
    n, N, K = 32, 96, 4
    G = gaussians(n, N, 0)
    b = random_schedule(n, N, 0, rate=0.6)
    st_ = MaintainState(random_basis(n, 4, 0), G, K)
    seen = 0

    def check():
        nonlocal seen
        if st_.restarts > seen:
            seen = st_.restarts
            assert np.max(np.abs(st_.P @ st_.P - st_.P)) <= 1e-8
            assert np.max(np.abs(st_.P - st_.P.T)) == 0
            w = np.linalg.eigvalsh(st_.P)
            assert w.min() >= -1e-9 and w.max() <= 1 + 1e-9

    for t in range(N):
        st_.query()
        check()
        for i in np.flatnonzero(b[:, t]):
            st_.update(int(i))
            check()
    assert seen >= N // K - 1


def test_operation_count_per_call():
    n, N = 64, 192
    K = batch_size(n)
    G = gaussians(n, N, 1)
    b = random_schedule(n, N, 1, rate=0.8)
    st_ = MaintainState(OrthonormalBasis(n), G, K)
    for t in range(N):
        st_.query()
        assert st_.last_op_cost <= 8 * n * K
        for i in np.flatnonzero(b[:, t]):
            st_.update(int(i))
            assert st_.last_op_cost <= 8 * n * K


def test_lazy_gaussians_match_dense():
    n, N = 10, 300
    lazy = GaussianColumns(n, N, RngStream(3), block=32)
    b = random_schedule(n, N, 3)
    np.testing.assert_array_equal(fast_maintain(b, lazy, 4), fast_maintain(b, lazy.toarray(), 4))


def test_eager_projector_matches_lazy():
    n, N = 16, 48
    G = gaussians(n, N, 8)
    b = random_schedule(n, N, 8)
    V = random_basis(n, 3, 8)
    fast, eager = MaintainState(V, G, 3), EagerProjector(V, G)
    for t in range(N):
        np.testing.assert_allclose(fast.query(), eager.query(), atol=1e-10)
        for i in np.flatnonzero(b[:, t]):
            fast.update(int(i))
            eager.update(int(i))


def test_default_batch_size():
    assert batch_size(64) == math.ceil(64**0.529)
    assert batch_size(1) == 1
