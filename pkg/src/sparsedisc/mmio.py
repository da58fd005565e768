"""Matrix Market (coordinate, real, general) input and output."""

from __future__ import annotations

import os
from typing import Union

import numpy as np
import scipy.io
import scipy.sparse as sp

from .linalg_core import CsrMatrix

PathLike = Union[str, os.PathLike]


def read_matrix_market(path: PathLike) -> CsrMatrix:
    """Read a sparse matrix; duplicate entries are summed, explicit zeros dropped."""
    raw = scipy.io.mmread(path)
    if not sp.issparse(raw):
        raw = sp.coo_array(np.asarray(raw, dtype=np.float64))
    return CsrMatrix.from_scipy(sp.csr_array(raw, dtype=np.float64))


def write_matrix_market(path: PathLike, A: CsrMatrix) -> None:
    """Write in coordinate real general form with round-trip precision."""
    scipy.io.mmwrite(path, sp.coo_matrix(A.scipy), field="real", precision=17, symmetry="general")


def write_coloring(path: PathLike, x) -> None:
    x = np.asarray(x)
    if not np.all(np.abs(x) == 1.0):
        raise ValueError("coloring entries must be +-1")
    with open(path, "w") as fh:
        fh.write("".join(f"{int(v)}\n" for v in x))


def read_coloring(path: PathLike) -> np.ndarray:
    with open(path) as fh:
        vals = [int(line) for line in fh if line.strip()]
    x = np.asarray(vals, dtype=np.float64)
    if not np.all(np.abs(x) == 1.0):
        raise ValueError("coloring entries must be +-1")
    return x
