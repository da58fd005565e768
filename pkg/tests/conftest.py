import numpy as np
import pytest
import scipy.sparse as sp

from sparsedisc.linalg_core import CsrMatrix, OrthonormalBasis, orthogonalize


def random_sparse(m, n, density, seed, signs=True):
    gen = np.random.default_rng(seed)
    sampler = (lambda size: gen.choice([-1.0, 1.0], size=size)) if signs else gen.standard_normal
    mat = sp.random_array((m, n), density=density, format="csr", rng=gen, data_sampler=sampler)
    return CsrMatrix.from_scipy(mat)


def random_pm1(m, n, seed):
    return CsrMatrix.from_dense(np.random.default_rng(seed).choice([-1.0, 1.0], size=(m, n)))


def random_01(m, n, seed, p=0.5):
    return CsrMatrix.from_dense((np.random.default_rng(seed).random((m, n)) < p).astype(float))


def random_basis(n, ell, seed):
    V = OrthonormalBasis(n)
    gen = np.random.default_rng(seed)
    while len(V) < ell:
        orthogonalize(gen.standard_normal(n), V)
    return V


@pytest.fixture
def gen():
    return np.random.default_rng(12345)
