import numpy as np
import pytest

from tiered_spgemm import (CsrMatrix, DimensionError, KernelError,
                           MatrixValidationError, RowRange, compress,
                           count_multiplications, masked_row_intersect_count,
                           multiply, slice_rows, spgemm_numeric,
                           spgemm_numeric_fused, spgemm_symbolic)
from tiered_spgemm.kernel import set_debug_checks
from conftest import (assert_matches_dense, dense_product,
                      dense_symbolic_counts, random_csr, random_graph,
                      to_dense)


def from_rows(rows, n_cols, values=True):
    r, c, v = [], [], []
    for i, cols in enumerate(rows):
        for j in cols:
            r.append(i)
            c.append(j)
            v.append(1.0)
    return CsrMatrix.from_coo(r, c, v if values else None, len(rows), n_cols)


# --- compression ---------------------------------------------------------

def test_compress_packs_one_word():
    cm = compress(from_rows([[0, 63]], 64))
    assert cm.n_sets == 1
    assert cm.set_idx[0] == 0
    assert int(cm.set_bits[0]) == (1 | (1 << 63))


def test_compress_splits_across_words():
    cm = compress(from_rows([[0, 64]], 65))
    assert cm.n_sets == 2
    assert sorted(cm.set_idx.tolist()) == [0, 1]


def test_compress_empty_row():
    cm = compress(from_rows([[], [3]], 8))
    assert cm.row_ptr.tolist() == [0, 0, 1]


def test_compress_popcount_identity(rng):
    b = random_csr(rng, 60, 200, 8)
    cm = compress(b)
    pops = np.zeros(b.num_rows, dtype=np.int64)
    for i in range(b.num_rows):
        for t in range(int(cm.row_ptr[i]), int(cm.row_ptr[i + 1])):
            pops[i] += int(cm.set_bits[t]).bit_count()
    assert np.array_equal(pops, b.row_nnz())


# --- symbolic phase ------------------------------------------------------

def test_symbolic_identity_lhs(rng):
    b = random_csr(rng, 20, 30, 4)
    counts = spgemm_symbolic(CsrMatrix.identity(20), compress(b))
    assert np.array_equal(counts, b.row_nnz())


def test_symbolic_union():
    a = from_rows([[0, 1]], 2)
    b = from_rows([[0, 1], [1, 2]], 3)
    assert spgemm_symbolic(a, compress(b)).tolist() == [3]


def test_symbolic_against_dense_oracle(rng):
    for _ in range(5):
        a = random_csr(rng, 40, 40, 6)
        b = random_csr(rng, 40, 40, 6)
        counts = spgemm_symbolic(a, compress(b))
        assert np.array_equal(counts, dense_symbolic_counts(a, b))


def test_symbolic_dimension_mismatch():
    a = from_rows([[0]], 3)
    b = from_rows([[0], [0]], 2)
    with pytest.raises(DimensionError):
        spgemm_symbolic(a, compress(b))


# --- numeric phase -------------------------------------------------------

def test_numeric_identity_rhs():
    a = CsrMatrix.from_coo([0, 0, 1], [0, 1, 1], [1.0, 2.0, 1.0], 2, 2)
    c = multiply(a, CsrMatrix.identity(2))
    assert_matches_dense(c, to_dense(a))


def test_numeric_identity_lhs(rng):
    b = random_csr(rng, 25, 30, 5)
    c = multiply(CsrMatrix.identity(25), b)
    assert_matches_dense(c, to_dense(b))


def test_numeric_matches_dense_oracle(rng):
    set_debug_checks(True)
    try:
        for _ in range(20):
            n = int(rng.integers(5, 64))
            a = random_csr(rng, n, n, 8)
            b = random_csr(rng, n, n, 8)
            counts = spgemm_symbolic(a, compress(b))
            c = spgemm_numeric(a, b, counts)
            assert np.array_equal(c.row_nnz(), counts)
            assert_matches_dense(c, dense_product(a, b))
    finally:
        set_debug_checks(False)


def test_numeric_tolerates_unsorted_columns(rng):
    # Reverse every row's storage order; the product must not change.
    a = random_csr(rng, 20, 20, 5)
    rev_cols = a.col_idx.copy()
    rev_vals = a.values.copy()
    for i in range(a.num_rows):
        lo, hi = int(a.row_ptr[i]), int(a.row_ptr[i + 1])
        rev_cols[lo:hi] = rev_cols[lo:hi][::-1]
        rev_vals[lo:hi] = rev_vals[lo:hi][::-1]
    a_rev = CsrMatrix(20, 20, a.row_ptr, rev_cols, rev_vals)
    b = random_csr(rng, 20, 20, 5)
    assert_matches_dense(multiply(a_rev, b), dense_product(a, b))


def test_numeric_rejects_wrong_counts(rng):
    a = random_csr(rng, 10, 10, 3, exact_delta=True)
    b = random_csr(rng, 10, 10, 3, exact_delta=True)
    counts = spgemm_symbolic(a, compress(b))
    bad = counts.copy()
    bad[0] += 1
    with pytest.raises(KernelError):
        spgemm_numeric(a, b, bad)


def test_numeric_requires_values():
    a = from_rows([[0]], 1, values=False)
    with pytest.raises(MatrixValidationError):
        spgemm_numeric(a, a, np.array([1]))


def test_worker_count_does_not_change_result(rng):
    a = random_csr(rng, 50, 50, 6)
    b = random_csr(rng, 50, 50, 6)
    counts1 = spgemm_symbolic(a, compress(b), workers=1)
    counts4 = spgemm_symbolic(a, compress(b), workers=4)
    assert np.array_equal(counts1, counts4)
    c1 = spgemm_numeric(a, b, counts1, workers=1)
    c4 = spgemm_numeric(a, b, counts1, workers=4)
    assert np.array_equal(c1.col_idx, c4.col_idx)
    assert np.array_equal(c1.values, c4.values)


# --- fused multiply-add --------------------------------------------------

def test_fused_full_range_is_plain_product(rng):
    a = random_csr(rng, 30, 40, 5)
    b = random_csr(rng, 40, 35, 5)
    counts = spgemm_symbolic(a, compress(b))
    plain = spgemm_numeric(a, b, counts)
    fused = spgemm_numeric_fused(a, b, CsrMatrix.empty(30, 35),
                                 RowRange(0, 30), RowRange(0, 40))
    assert np.array_equal(fused.row_ptr, plain.row_ptr)
    assert np.array_equal(fused.col_idx, plain.col_idx)
    assert np.array_equal(fused.values, plain.values)  # bit identical


def test_fused_two_way_split_sums_to_product(rng):
    from tiered_spgemm import products_match
    a = random_csr(rng, 30, 40, 6)
    b = random_csr(rng, 40, 30, 6)
    plain = multiply(a, b)
    part = CsrMatrix.empty(30, 30)
    for lo, hi in ((0, 17), (17, 40)):
        part = spgemm_numeric_fused(a, slice_rows(b, lo, hi), part,
                                    RowRange(0, 30), RowRange(lo, hi))
    ok, rel = products_match(part, plain, rtol=1e-12)
    assert ok, "split product diverged (max rel %.3e)" % rel


def test_fused_empty_a_rows_returns_partial():
    a = from_rows([[0], [1]], 2)
    empty_partial = CsrMatrix.empty(0, 2)
    out = spgemm_numeric_fused(a, slice_rows(a, 0, 1), empty_partial,
                               RowRange(0, 0), RowRange(0, 1))
    assert out is empty_partial


def test_fused_skips_out_of_range_a_columns():
    # A row touches columns 0 and 2; restricting B to rows [0,1) must ignore
    # the column-2 entry even though A's columns are unsorted.
    a = CsrMatrix(1, 3, np.array([0, 2]), np.array([2, 0]), np.array([5.0, 1.0]))
    b = from_rows([[0], [1], [2]], 3)
    out = spgemm_numeric_fused(a, slice_rows(b, 0, 1), CsrMatrix.empty(1, 3),
                               RowRange(0, 1), RowRange(0, 1))
    assert to_dense(out).tolist() == [[1.0, 0.0, 0.0]]


# --- masked intersect count ---------------------------------------------

def lower_from_edges(edges, n):
    r = [max(u, v) for u, v in edges]
    c = [min(u, v) for u, v in edges]
    return CsrMatrix.from_coo(r, c, None, n, n)


def test_masked_count_triangle_free():
    path = lower_from_edges([(0, 1), (1, 2), (2, 3)], 4)
    assert masked_row_intersect_count(path, compress(path)) == 0


def test_masked_count_k4():
    edges = [(i, j) for i in range(4) for j in range(i + 1, 4)]
    l = lower_from_edges(edges, 4)
    assert masked_row_intersect_count(l, compress(l)) == 4


def test_masked_count_requires_lower_triangular():
    bad = CsrMatrix.from_coo([0], [1], None, 2, 2)
    with pytest.raises(MatrixValidationError):
        masked_row_intersect_count(bad, compress(bad))


def test_masked_count_matches_enumeration(rng):
    from conftest import triangle_count_oracle
    for _ in range(10):
        g = random_graph(rng, 30, 0.2)
        rows = np.repeat(np.arange(30), g.row_nnz())
        keep = rows > g.col_idx
        l = CsrMatrix.from_coo(rows[keep], g.col_idx[keep], None, 30, 30)
        assert masked_row_intersect_count(l, compress(l)) == triangle_count_oracle(g)


# --- multiplication counting ---------------------------------------------

def test_count_multiplications_identity(rng):
    b = random_csr(rng, 15, 15, 4)
    assert count_multiplications(CsrMatrix.identity(15), b) == b.nnz


def test_count_multiplications_single_row():
    a = from_rows([[2]], 3)
    b = from_rows([[], [], [0, 1, 2, 3, 4]], 5)
    assert count_multiplications(a, b) == 5


def test_count_multiplications_matches_double_loop(rng):
    a = random_csr(rng, 25, 30, 5)
    b = random_csr(rng, 30, 20, 5)
    expected = 0
    for i in range(a.num_rows):
        cols, _ = a.row(i)
        for k in cols:
            expected += int(b.row_nnz()[k])
    assert count_multiplications(a, b) == expected
