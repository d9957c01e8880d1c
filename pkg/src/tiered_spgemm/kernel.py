"""Two-phase row-wise SpGEMM with compression and hashmap accumulators.

The symbolic phase computes exact per-row nonzero counts of C = A * B by
unioning the compressed column structure of B; the numeric phase fills a
preallocated C.  A fused multiply-add variant restricts the multiply to a
row range of B and folds a previously computed partial product into the
accumulator, which is what the chunked execution algorithms stream through
two-tier memories.  A masked intersect-count kernel reuses the compressed
representation for triangle counting without materialising an output.

Rows are independent: distinct output rows may be computed by different
workers, each holding a private slab from the pool.  Within one row, A's
entries are always processed in storage order, so results are deterministic
for a fixed chunking regardless of worker count.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .accumulator import HashmapAccumulator, MemoryPool, accumulator_capacity
from .csr import CsrMatrix
from .errors import DimensionError, KernelError, MatrixValidationError

COMPRESSION_WORD_BITS = 64

_debug_checks = False


def set_debug_checks(enabled: bool) -> None:
    """Enable full-scan accumulator soundness checks after every row reset."""
    global _debug_checks
    _debug_checks = bool(enabled)


@dataclass(frozen=True)
class RowRange:
    """Half-open row interval [begin, end)."""

    begin: int
    end: int

    def __post_init__(self):
        if not (0 <= self.begin <= self.end):
            raise DimensionError("invalid row range [%d, %d)" % (self.begin, self.end))

    def __len__(self):
        return self.end - self.begin


@dataclass
class CompressedMatrix:
    """Bitmask-encoded column structure: per row, (set index, 64-bit mask) pairs."""

    num_rows: int
    row_ptr: np.ndarray
    set_idx: np.ndarray
    set_bits: np.ndarray

    def __post_init__(self):
        self.row_ptr = np.asarray(self.row_ptr, dtype=np.int64)
        self.set_idx = np.asarray(self.set_idx, dtype=np.int64)
        self.set_bits = np.asarray(self.set_bits, dtype=np.uint64)
        for arr in (self.row_ptr, self.set_idx, self.set_bits):
            arr.flags.writeable = False

    @property
    def n_sets(self) -> int:
        return int(self.set_idx.shape[0])


def compress(b: CsrMatrix) -> CompressedMatrix:
    """Encode each row's columns as (column // 64, bit column % 64) pairs,
    OR-merging duplicates within the row."""
    cols = b.col_idx.tolist()
    rp = b.row_ptr.tolist()
    row_ptr = [0]
    set_idx = []
    set_bits = []
    for i in range(b.num_rows):
        groups = {}
        for t in range(rp[i], rp[i + 1]):
            c = cols[t]
            s = c >> 6
            groups[s] = groups.get(s, 0) | (1 << (c & 63))
        set_idx.extend(groups.keys())
        set_bits.extend(groups.values())
        row_ptr.append(len(set_idx))
    return CompressedMatrix(b.num_rows,
                            np.array(row_ptr, dtype=np.int64),
                            np.array(set_idx, dtype=np.int64),
                            np.array(set_bits, dtype=np.uint64))


def count_multiplications(a: CsrMatrix, b: CsrMatrix) -> int:
    """Scalar multiplications performed by C = A * B; flops are twice this."""
    if a.num_cols != b.num_rows:
        raise DimensionError("A is %dx%d but B has %d rows"
                             % (a.num_rows, a.num_cols, b.num_rows))
    if a.nnz == 0:
        return 0
    return int(b.row_nnz()[a.col_idx].sum())


def _row_blocks(num_rows, workers):
    workers = max(1, min(workers, num_rows)) if num_rows else 1
    bounds = np.linspace(0, num_rows, workers + 1, dtype=np.int64)
    return [(int(bounds[i]), int(bounds[i + 1])) for i in range(workers)
            if bounds[i] < bounds[i + 1]]


def _run_blocks(blocks, work, workers):
    if len(blocks) <= 1 or workers <= 1:
        for blk in blocks:
            work(blk)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(work, blk) for blk in blocks]
        for f in futures:
            f.result()


def spgemm_symbolic(a: CsrMatrix, cb: CompressedMatrix, workers: int = 1) -> np.ndarray:
    """Per-row nonzero counts of C = A * B from B's compressed structure."""
    if a.num_cols != cb.num_rows:
        raise DimensionError("A has %d cols but compressed B has %d rows"
                             % (a.num_cols, cb.num_rows))
    rp_a = a.row_ptr.tolist()
    ca = a.col_idx.tolist()
    rp_b = cb.row_ptr.tolist()
    sets_b = cb.set_idx.tolist()
    bits_b = cb.set_bits.tolist()

    counts = np.zeros(a.num_rows, dtype=np.int64)
    bounds = [0] * a.num_rows
    max_bound = 1
    for i in range(a.num_rows):
        bound = 0
        for t in range(rp_a[i], rp_a[i + 1]):
            k = ca[t]
            bound += rp_b[k + 1] - rp_b[k]
        bounds[i] = bound
        if bound > max_bound:
            max_bound = bound
    pool = MemoryPool.for_row_bound(max_bound)

    def work(block):
        lo, hi = block
        slab = pool.acquire()
        try:
            for i in range(lo, hi):
                if bounds[i] == 0:
                    continue
                acc = HashmapAccumulator(slab, accumulator_capacity(bounds[i]))
                for t in range(rp_a[i], rp_a[i + 1]):
                    k = ca[t]
                    for s in range(rp_b[k], rp_b[k + 1]):
                        acc.or_bits(sets_b[s], bits_b[s])
                counts[i] = acc.popcount_sum()
                acc.reset()
                if _debug_checks and acc.live_slot_count():
                    raise KernelError("live keys survived accumulator reset")
        finally:
            pool.release(slab)

    _run_blocks(_row_blocks(a.num_rows, workers), work, workers)
    return counts


def spgemm_numeric(a: CsrMatrix, b: CsrMatrix, c_counts, workers: int = 1) -> CsrMatrix:
    """Numeric phase: C = A * B with exactly c_counts nonzeros per row.

    Column order within a C row is the accumulator's first-touch order.
    """
    if a.num_cols != b.num_rows:
        raise DimensionError("A is %dx%d but B has %d rows"
                             % (a.num_rows, a.num_cols, b.num_rows))
    if b.values is None or a.values is None:
        raise MatrixValidationError("numeric multiply requires values on both operands")
    c_counts = np.asarray(c_counts, dtype=np.int64)
    if c_counts.shape[0] != a.num_rows:
        raise DimensionError("c_counts length must equal A's row count")

    c_ptr = np.zeros(a.num_rows + 1, dtype=np.int64)
    np.cumsum(c_counts, out=c_ptr[1:])
    c_cols = np.empty(int(c_ptr[-1]), dtype=np.int64)
    c_vals = np.empty(int(c_ptr[-1]), dtype=np.float64)

    rp_a = a.row_ptr.tolist()
    ca = a.col_idx.tolist()
    va = a.values.tolist()
    rp_b = b.row_ptr.tolist()
    cb = b.col_idx.tolist()
    vb = b.values.tolist()
    counts = c_counts.tolist()
    pool = MemoryPool.for_row_bound(int(c_counts.max()) if a.num_rows else 1)

    def work(block):
        lo, hi = block
        slab = pool.acquire()
        try:
            for i in range(lo, hi):
                want = counts[i]
                if want == 0:
                    continue
                acc = HashmapAccumulator(slab, accumulator_capacity(want))
                for t in range(rp_a[i], rp_a[i + 1]):
                    k = ca[t]
                    av = va[t]
                    for s in range(rp_b[k], rp_b[k + 1]):
                        acc.add(cb[s], av * vb[s])
                    if acc.occupied > want:
                        raise KernelError(
                            "row %d accumulated more than its symbolic count" % i)
                if acc.occupied != want:
                    raise KernelError(
                        "row %d: symbolic count %d but %d entries accumulated"
                        % (i, want, acc.occupied))
                pos = int(c_ptr[i])
                for key, val in acc.items():
                    c_cols[pos] = key
                    c_vals[pos] = val
                    pos += 1
                acc.reset()
                if _debug_checks and acc.live_slot_count():
                    raise KernelError("live keys survived accumulator reset")
        finally:
            pool.release(slab)

    _run_blocks(_row_blocks(a.num_rows, workers), work, workers)
    return CsrMatrix(a.num_rows, b.num_cols, c_ptr, c_cols, c_vals)


def spgemm_numeric_fused(a: CsrMatrix, b_chunk: CsrMatrix, c_partial: CsrMatrix,
                         a_rows: RowRange, b_rows: RowRange,
                         workers: int = 1) -> CsrMatrix:
    """Fused multiply-add over a B row range:

        result = c_partial + A[a_rows, b_rows] * B[b_rows, :]

    ``b_chunk`` holds exactly the rows of B in ``b_rows``, rebased to start
    at row 0; ``c_partial`` holds the running partial product for ``a_rows``
    (also rebased).  Entries of A whose column falls outside ``b_rows`` are
    skipped by a linear scan; columns are never assumed sorted.  Existing
    partial values are inserted into the accumulator before the multiply,
    so a full-range call with an empty partial reproduces the plain numeric
    kernel bit for bit.
    """
    if a_rows.end > a.num_rows:
        raise DimensionError("a_rows exceeds A's row count")
    if b_rows.end > a.num_cols:
        raise DimensionError("b_rows exceeds A's column count")
    if b_chunk.num_rows != len(b_rows):
        raise DimensionError("b_chunk must hold exactly the b_rows rows")
    if c_partial.num_rows != len(a_rows):
        raise DimensionError("c_partial must cover exactly the a_rows rows")
    if c_partial.num_cols != b_chunk.num_cols:
        raise DimensionError("c_partial and b_chunk column spaces differ")
    if len(a_rows) == 0:
        return c_partial
    if a.values is None or b_chunk.values is None or c_partial.values is None:
        raise MatrixValidationError("fused multiply requires numeric operands")

    rp_a = a.row_ptr.tolist()
    ca = a.col_idx.tolist()
    va = a.values.tolist()
    rp_b = b_chunk.row_ptr.tolist()
    cb = b_chunk.col_idx.tolist()
    vb = b_chunk.values.tolist()
    rp_c = c_partial.row_ptr.tolist()
    cc = c_partial.col_idx.tolist()
    vc = c_partial.values.tolist()
    b_lo, b_hi = b_rows.begin, b_rows.end

    n_out = len(a_rows)
    bounds = [0] * n_out
    max_bound = 1
    for li in range(n_out):
        gi = a_rows.begin + li
        bound = rp_c[li + 1] - rp_c[li]
        for t in range(rp_a[gi], rp_a[gi + 1]):
            k = ca[t]
            if b_lo <= k < b_hi:
                local = k - b_lo
                bound += rp_b[local + 1] - rp_b[local]
        bounds[li] = bound
        if bound > max_bound:
            max_bound = bound
    pool = MemoryPool.for_row_bound(max_bound)

    out_ptr = [0] * (n_out + 1)
    out_rows = [None] * n_out

    def work(block):
        lo, hi = block
        slab = pool.acquire()
        try:
            for li in range(lo, hi):
                if bounds[li] == 0:
                    out_rows[li] = ((), ())
                    continue
                acc = HashmapAccumulator(slab, accumulator_capacity(bounds[li]))
                for t in range(rp_c[li], rp_c[li + 1]):
                    acc.add(cc[t], vc[t])
                gi = a_rows.begin + li
                for t in range(rp_a[gi], rp_a[gi + 1]):
                    k = ca[t]
                    if not (b_lo <= k < b_hi):
                        continue
                    av = va[t]
                    local = k - b_lo
                    for s in range(rp_b[local], rp_b[local + 1]):
                        acc.add(cb[s], av * vb[s])
                if acc.occupied > bounds[li]:
                    raise KernelError("fused row %d overflowed its bound" % li)
                keys = []
                vals = []
                for key, val in acc.items():
                    keys.append(key)
                    vals.append(val)
                out_rows[li] = (keys, vals)
                acc.reset()
                if _debug_checks and acc.live_slot_count():
                    raise KernelError("live keys survived accumulator reset")
        finally:
            pool.release(slab)

    _run_blocks(_row_blocks(n_out, workers), work, workers)

    for li in range(n_out):
        out_ptr[li + 1] = out_ptr[li] + len(out_rows[li][0])
    cols = np.empty(out_ptr[-1], dtype=np.int64)
    vals = np.empty(out_ptr[-1], dtype=np.float64)
    for li in range(n_out):
        keys, row_vals = out_rows[li]
        cols[out_ptr[li]:out_ptr[li + 1]] = keys
        vals[out_ptr[li]:out_ptr[li + 1]] = row_vals
    return CsrMatrix(n_out, b_chunk.num_cols,
                     np.array(out_ptr, dtype=np.int64), cols, vals)


def multiply(a: CsrMatrix, b: CsrMatrix, workers: int = 1) -> CsrMatrix:
    """Convenience wrapper: compress, symbolic count, numeric fill."""
    counts = spgemm_symbolic(a, compress(b), workers=workers)
    return spgemm_numeric(a, b, counts, workers=workers)


def masked_row_intersect_count(l: CsrMatrix, cl: CompressedMatrix,
                               workers: int = 1) -> int:
    """Sum over rows i and entries j of row i of |cols(L row j) & cols(L row i)|.

    L must be strictly lower triangular and cl its compressed form.  No
    output matrix is materialised; with L the lower triangle of a graph in
    degree order, the total is the graph's triangle count.  Workers each
    count a contiguous row block; the integer total is worker-independent.
    """
    if l.num_rows != cl.num_rows:
        raise DimensionError("matrix and compressed form disagree on row count")
    rp = l.row_ptr.tolist()
    cols = l.col_idx.tolist()
    crp = cl.row_ptr.tolist()
    csets = cl.set_idx.tolist()
    cbits = cl.set_bits.tolist()

    blocks = _row_blocks(l.num_rows, workers)
    partial_sums = [0] * len(blocks)

    def work(item):
        bi, (lo_row, hi_row) = item
        total = 0
        for i in range(lo_row, hi_row):
            lo, hi = rp[i], rp[i + 1]
            if lo == hi:
                continue
            mask = {}
            for t in range(lo, hi):
                c = cols[t]
                if c >= i:
                    raise MatrixValidationError(
                        "row %d has column %d: not strictly lower triangular" % (i, c))
                s = c >> 6
                mask[s] = mask.get(s, 0) | (1 << (c & 63))
            get = mask.get
            for t in range(lo, hi):
                j = cols[t]
                for s in range(crp[j], crp[j + 1]):
                    hit = get(csets[s])
                    if hit:
                        total += (cbits[s] & hit).bit_count()
        partial_sums[bi] = total

    _run_blocks(list(enumerate(blocks)), work, workers)
    return sum(partial_sums)
