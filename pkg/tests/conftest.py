"""Shared oracles and matrix builders for the test suite.

Every oracle here is independent of the library's kernels: dense products
go through numpy matmul on densified copies, triangle counts through the
trace of the cubed adjacency matrix.
"""

import numpy as np
import pytest

from tiered_spgemm import CsrMatrix


def to_dense(m: CsrMatrix) -> np.ndarray:
    out = np.zeros((m.num_rows, m.num_cols))
    rows = np.repeat(np.arange(m.num_rows), np.diff(m.row_ptr))
    if m.values is None:
        out[rows, m.col_idx] = 1.0
    else:
        out[rows, m.col_idx] = m.values
    return out


def dense_product(a: CsrMatrix, b: CsrMatrix) -> np.ndarray:
    return to_dense(a) @ to_dense(b)


def dense_symbolic_counts(a: CsrMatrix, b: CsrMatrix) -> np.ndarray:
    bools = (to_dense(a) != 0).astype(np.int64) @ (to_dense(b) != 0).astype(np.int64)
    return (bools > 0).sum(axis=1).astype(np.int64)


def assert_matches_dense(c: CsrMatrix, oracle: np.ndarray,
                         rtol: float = 1e-12, zero_atol: float = 1e-300):
    got = to_dense(c)
    nz = oracle != 0
    assert np.all(np.abs(got[nz] - oracle[nz]) <= rtol * np.abs(oracle[nz])), \
        "entries diverge from the dense oracle"
    assert np.all(np.abs(got[~nz]) <= zero_atol), \
        "oracle-zero positions must be absent or below 1e-300"


def random_csr(rng, rows: int, cols: int, delta: int,
               exact_delta: bool = False) -> CsrMatrix:
    """Random CSR with up to (or exactly) delta distinct columns per row,
    positive values in (0.1, 1]."""
    r, c, v = [], [], []
    for i in range(rows):
        k = delta if exact_delta else int(rng.integers(0, delta + 1))
        k = min(k, cols)
        for col in rng.choice(cols, size=k, replace=False):
            r.append(i)
            c.append(int(col))
            v.append(float(rng.uniform(0.1, 1.0)))
    return CsrMatrix.from_coo(r, c, v, rows, cols)


def random_graph(rng, n: int, p: float) -> CsrMatrix:
    """Erdos-Renyi undirected pattern, empty diagonal."""
    upper = np.triu(rng.random((n, n)) < p, 1)
    full = upper | upper.T
    rows, cols = np.nonzero(full)
    return CsrMatrix.from_coo(rows, cols, None, n, n)


def triangle_count_oracle(g: CsrMatrix) -> int:
    a = (to_dense(g) != 0).astype(np.int64)
    return int(np.trace(a @ a @ a)) // 6


def permute_graph(g: CsrMatrix, perm) -> CsrMatrix:
    perm = np.asarray(perm, dtype=np.int64)
    rows = perm[np.repeat(np.arange(g.num_rows), np.diff(g.row_ptr))]
    cols = perm[g.col_idx]
    return CsrMatrix.from_coo(rows, cols, None, g.num_rows, g.num_cols)


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
