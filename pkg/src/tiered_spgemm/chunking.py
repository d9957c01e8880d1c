"""Row partitioning, chunked execution for two-tier memories, and the
cost-based chunking decision heuristic.

Three execution orders are provided:

* ``knl_chunk_multiply`` streams row chunks of B through fast memory while
  A and C stay in slow memory; total billed copy traffic is size(B).
* ``gpu_chunk_multiply_1`` keeps an A/C row range resident and streams B
  chunks past it; billed traffic is size(A) + size(C) + size(B) * |P_AC|.
* ``gpu_chunk_multiply_2`` keeps a B chunk resident and streams A/C ranges
  past it; billed traffic is size(B) + size(A) * |P_B| + size(C) * (|P_B| - 1).

Ledger billing follows those closed forms exactly.  For the B-in-place
order that means each intermediate partial-C round trip is billed once, on
the copy-in, at the range's full final byte size; the first copy-in (empty
C) and every writeback are logged as zero-byte events so the loop structure
stays auditable while the totals match the formula to the byte.  The
AC-in-place order needs no such netting: C's offsets are billed on the way
in and its entries on the way out, which sums to size(C) exactly.

Residency is tracked physically and asserted against the fast capacity on
every allocation, independent of billing.
"""

from dataclasses import dataclass

import numpy as np

from .csr import OFFSET_BYTES, CsrMatrix, slice_rows
from .errors import CapacityError, DimensionError, UnsplittableRowError
from .kernel import RowRange, spgemm_numeric_fused
from .memory import FAST, SLOW, CopyLedger, MemoryModel

KNL_CHUNK = "knl_chunk"
GPU_CHUNK1_AC_IN_PLACE = "gpu_chunk1_ac_in_place"
GPU_CHUNK2_B_IN_PLACE = "gpu_chunk2_b_in_place"


@dataclass
class RowPartition:
    """Ordered contiguous row ranges covering [0, num_rows), with byte sizes."""

    ranges: list
    range_bytes: list
    num_rows: int

    def __post_init__(self):
        expect = 0
        for r in self.ranges:
            if r.begin != expect:
                raise DimensionError("partition ranges must be contiguous")
            expect = r.end
        if expect != self.num_rows:
            raise DimensionError("partition must cover all %d rows" % self.num_rows)
        if len(self.range_bytes) != len(self.ranges):
            raise DimensionError("one byte size per range required")

    def __len__(self):
        return len(self.ranges)

    @property
    def max_range_bytes(self) -> int:
        return max(self.range_bytes) if self.range_bytes else 0

    @property
    def total_bytes(self) -> int:
        return sum(self.range_bytes)

    def to_json_dict(self) -> dict:
        return {"ranges": [[r.begin, r.end] for r in self.ranges],
                "range_bytes": [int(b) for b in self.range_bytes]}


def singleton_partition(row_bytes) -> RowPartition:
    row_bytes = np.asarray(row_bytes, dtype=np.int64)
    n = int(row_bytes.shape[0])
    return RowPartition([RowRange(0, n)], [int(row_bytes.sum())], n)


def binary_search_partition(row_bytes, target: int, capacity: int | None = None) -> RowPartition:
    """Split rows at the largest prefix not exceeding each multiple of target.

    Boundaries come from a binary search over the byte prefix sums; any
    range that still exceeds ``capacity`` is greedily subdivided.  A single
    row larger than the capacity cannot be split and is rejected.
    """
    row_bytes = np.asarray(row_bytes, dtype=np.int64)
    if target <= 0:
        raise ValueError("partition target must be positive")
    n = int(row_bytes.shape[0])
    if n == 0:
        return RowPartition([], [], 0)
    if capacity is not None and int(row_bytes.max()) > capacity:
        worst = int(np.argmax(row_bytes))
        raise UnsplittableRowError("row %d is %d bytes, capacity %d"
                                   % (worst, int(row_bytes[worst]), capacity))
    prefix = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(row_bytes, out=prefix[1:])

    # Each boundary is the largest row index whose byte prefix does not
    # exceed the relevant multiple of target; runs of multiples that fall
    # inside a single row are skipped in one step.
    boundaries = [0]
    b = 0
    while b < n:
        k = -(-int(prefix[b + 1]) // target)
        nb = int(np.searchsorted(prefix, k * target, side="right")) - 1
        nb = min(nb, n)
        boundaries.append(nb)
        b = nb

    if capacity is not None:
        refined = [0]
        for end in boundaries[1:]:
            while int(prefix[end] - prefix[refined[-1]]) > capacity:
                cut = int(np.searchsorted(prefix, int(prefix[refined[-1]]) + capacity,
                                          side="right")) - 1
                refined.append(cut)
            refined.append(end)
        boundaries = refined

    ranges = []
    sizes = []
    for lo, hi in zip(boundaries[:-1], boundaries[1:]):
        if hi > lo:
            ranges.append(RowRange(lo, hi))
            sizes.append(int(prefix[hi] - prefix[lo]))
    return RowPartition(ranges, sizes, n)


def balanced_partition(row_bytes, portion: int, capacity: int | None = None) -> RowPartition:
    """Partition into np = ceil(total/portion) chunks of pSize = ceil(total/np)."""
    row_bytes = np.asarray(row_bytes, dtype=np.int64)
    total = int(row_bytes.sum())
    if portion <= 0:
        raise ValueError("portion must be positive")
    if total == 0:
        return singleton_partition(row_bytes)
    n_parts = -(-total // portion)
    p_size = -(-total // n_parts)
    return binary_search_partition(row_bytes, p_size,
                                   capacity if capacity is not None else portion)


@dataclass
class ChunkPlan:
    """A chosen chunking algorithm with its partitions and predicted traffic."""

    algorithm: str
    partition_b: RowPartition
    partition_ac: RowPartition | None
    predicted_copy_bytes: int
    heuristic_branch: int | None = None

    def to_json_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "partition_b": self.partition_b.to_json_dict(),
            "partition_ac": None if self.partition_ac is None
                            else self.partition_ac.to_json_dict(),
            "predicted_copy_bytes": int(self.predicted_copy_bytes),
            "heuristic_branch": self.heuristic_branch,
        }


def copy_cost_chunk1(size_a: int, size_b: int, size_c: int, n_ac_parts: int) -> int:
    """Copy traffic of the AC-in-place order: A and C move once, B moves
    once per A/C range."""
    if n_ac_parts < 1:
        raise ValueError("need at least one A/C part")
    return size_a + size_c + size_b * n_ac_parts


def copy_cost_chunk2(size_a: int, size_b: int, size_c: int, n_b_parts: int) -> int:
    """Copy traffic of the B-in-place order: B moves once, A moves once per
    B range, C's partials are re-read for every B range after the first."""
    if n_b_parts < 1:
        raise ValueError("need at least one B part")
    return size_b + size_a * n_b_parts + size_c * (n_b_parts - 1)


def c_row_byte_sizes(num_rows: int, c_counts) -> np.ndarray:
    """Per-row byte sizes of the not-yet-built C, from its symbolic counts."""
    counts = np.asarray(c_counts, dtype=np.int64)
    per_row = counts * 16 + OFFSET_BYTES
    if num_rows > 0:
        per_row = per_row.copy()
        per_row[0] += OFFSET_BYTES
    return per_row


def _range_bytes(row_bytes_prefix, r: RowRange) -> int:
    return int(row_bytes_prefix[r.end] - row_bytes_prefix[r.begin])


def _prefix(row_bytes) -> np.ndarray:
    row_bytes = np.asarray(row_bytes, dtype=np.int64)
    out = np.zeros(row_bytes.shape[0] + 1, dtype=np.int64)
    np.cumsum(row_bytes, out=out[1:])
    return out


def _assemble(partials, c_counts, num_cols) -> CsrMatrix:
    """Concatenate per-range partial results into the final C."""
    counts = np.asarray(c_counts, dtype=np.int64)
    c_ptr = np.zeros(counts.shape[0] + 1, dtype=np.int64)
    np.cumsum(counts, out=c_ptr[1:])
    cols = np.empty(int(c_ptr[-1]), dtype=np.int64)
    vals = np.empty(int(c_ptr[-1]), dtype=np.float64)
    for rng, part in partials:
        if not np.array_equal(part.row_nnz(), counts[rng.begin:rng.end]):
            raise DimensionError("chunked result rows disagree with symbolic counts")
        lo, hi = int(c_ptr[rng.begin]), int(c_ptr[rng.end])
        cols[lo:hi] = part.col_idx
        vals[lo:hi] = part.values
    return CsrMatrix(counts.shape[0], num_cols, c_ptr, cols, vals)


def knl_chunk_multiply(a: CsrMatrix, b: CsrMatrix, c_counts, fast_size: int,
                       model: MemoryModel, workers: int = 1):
    """Stream ceil(size(B)/fast_size) row chunks of B through fast memory,
    fusing each into the running product.  A and C stay in slow memory.

    Returns (C, ledger); the ledger bills exactly size(B)."""
    if a.num_cols != b.num_rows:
        raise DimensionError("A has %d cols but B has %d rows" % (a.num_cols, b.num_rows))
    if fast_size <= 0:
        raise ValueError("fast_size must be positive")
    row_bytes = b.row_byte_sizes()
    size_b = int(row_bytes.sum())
    n_parts = max(1, -(-size_b // fast_size))
    p_size = -(-size_b // n_parts)
    partition = binary_search_partition(row_bytes, p_size, fast_size)

    ledger = CopyLedger(model)
    prefix = _prefix(row_bytes)
    partial = CsrMatrix.empty(a.num_rows, b.num_cols)
    full_rows = RowRange(0, a.num_rows)
    for rng in partition.ranges:
        chunk_bytes = _range_bytes(prefix, rng)
        ledger.alloc(FAST, chunk_bytes)
        ledger.record(chunk_bytes, SLOW, FAST, tag="B")
        chunk = slice_rows(b, rng.begin, rng.end)
        partial = spgemm_numeric_fused(a, chunk, partial, full_rows, rng,
                                       workers=workers)
        ledger.free(FAST, chunk_bytes)

    c = _assemble([(full_rows, partial)], c_counts, b.num_cols)
    return c, ledger


def _check_partition(p: RowPartition, num_rows: int, what: str) -> None:
    if p.num_rows != num_rows:
        raise DimensionError("%s partition covers %d rows, expected %d"
                             % (what, p.num_rows, num_rows))


def gpu_chunk_multiply_1(a: CsrMatrix, b: CsrMatrix, c_counts, p_ac: RowPartition,
                         p_b: RowPartition, model: MemoryModel, workers: int = 1):
    """AC-in-place order: hold an A/C row range in fast memory, stream B
    chunks past it, write the finished C range back once."""
    if a.num_cols != b.num_rows:
        raise DimensionError("A has %d cols but B has %d rows" % (a.num_cols, b.num_rows))
    _check_partition(p_ac, a.num_rows, "AC")
    _check_partition(p_b, b.num_rows, "B")
    a_prefix = _prefix(a.row_byte_sizes())
    b_prefix = _prefix(b.row_byte_sizes())
    c_rows = c_row_byte_sizes(a.num_rows, c_counts)
    c_prefix = _prefix(c_rows)
    counts = np.asarray(c_counts, dtype=np.int64)

    ledger = CopyLedger(model)
    partials = []
    for ac in p_ac.ranges:
        a_bytes = _range_bytes(a_prefix, ac)
        c_full = _range_bytes(c_prefix, ac)
        c_entries = int(counts[ac.begin:ac.end].sum()) * 16
        ledger.alloc(FAST, a_bytes + c_full)
        ledger.record(a_bytes, SLOW, FAST, tag="A")
        # C is still empty here: only its offsets travel in.
        ledger.record(c_full - c_entries, SLOW, FAST, tag="C_in")
        partial = CsrMatrix.empty(len(ac), b.num_cols)
        for br in p_b.ranges:
            b_bytes = _range_bytes(b_prefix, br)
            ledger.alloc(FAST, b_bytes)
            ledger.record(b_bytes, SLOW, FAST, tag="B")
            chunk = slice_rows(b, br.begin, br.end)
            partial = spgemm_numeric_fused(a, chunk, partial, ac, br,
                                           workers=workers)
            ledger.free(FAST, b_bytes)
        ledger.record(c_entries, FAST, SLOW, tag="C_out")
        ledger.free(FAST, a_bytes + c_full)
        partials.append((ac, partial))

    c = _assemble(partials, c_counts, b.num_cols)
    return c, ledger


def gpu_chunk_multiply_2(a: CsrMatrix, b: CsrMatrix, c_counts, p_ac: RowPartition,
                         p_b: RowPartition, model: MemoryModel, workers: int = 1):
    """B-in-place order: hold a B chunk in fast memory, stream every A/C
    range past it, carrying partial C results between sweeps.

    Billing nets each partial round trip onto its copy-in (full range
    bytes); writebacks and the first, offsets-only copy-in appear as
    zero-byte events."""
    if a.num_cols != b.num_rows:
        raise DimensionError("A has %d cols but B has %d rows" % (a.num_cols, b.num_rows))
    _check_partition(p_ac, a.num_rows, "AC")
    _check_partition(p_b, b.num_rows, "B")
    a_prefix = _prefix(a.row_byte_sizes())
    b_prefix = _prefix(b.row_byte_sizes())
    c_prefix = _prefix(c_row_byte_sizes(a.num_rows, c_counts))

    ledger = CopyLedger(model)
    partials = {i: CsrMatrix.empty(len(ac), b.num_cols)
                for i, ac in enumerate(p_ac.ranges)}
    for bi, br in enumerate(p_b.ranges):
        b_bytes = _range_bytes(b_prefix, br)
        ledger.alloc(FAST, b_bytes)
        ledger.record(b_bytes, SLOW, FAST, tag="B")
        chunk = slice_rows(b, br.begin, br.end)
        for i, ac in enumerate(p_ac.ranges):
            a_bytes = _range_bytes(a_prefix, ac)
            c_full = _range_bytes(c_prefix, ac)
            ledger.alloc(FAST, a_bytes + c_full)
            ledger.record(a_bytes, SLOW, FAST, tag="A")
            ledger.record(c_full if bi > 0 else 0, SLOW, FAST, tag="C_in")
            partials[i] = spgemm_numeric_fused(a, chunk, partials[i], ac, br,
                                               workers=workers)
            ledger.record(0, FAST, SLOW, tag="C_out")
            ledger.free(FAST, a_bytes + c_full)
        ledger.free(FAST, b_bytes)

    c = _assemble([(ac, partials[i]) for i, ac in enumerate(p_ac.ranges)],
                  c_counts, b.num_cols)
    return c, ledger


def decide_chunking(size_a: int, size_b: int, size_c: int, row_bytes_a,
                    row_bytes_b, row_bytes_c, fast_size: int) -> ChunkPlan:
    """Pick a chunking order and partitions for a fast memory of fast_size bytes.

    The fast tier is split 75/25; whichever matrix group fits the big
    portion whole is left unpartitioned and the leftover is handed to the
    other group.  When neither fits, the group with the larger movement
    cost (A and C together beat B when size(A) + 2*size(C) > size(B)) gets
    the big portion, both closed-form costs are evaluated for the resulting
    part counts, and the cheaper order wins; ties go to the AC-in-place
    order, which writes C to slow memory only once.
    """
    row_bytes_a = np.asarray(row_bytes_a, dtype=np.int64)
    row_bytes_b = np.asarray(row_bytes_b, dtype=np.int64)
    row_bytes_c = np.asarray(row_bytes_c, dtype=np.int64)
    if int(row_bytes_a.sum()) != size_a or int(row_bytes_b.sum()) != size_b \
            or int(row_bytes_c.sum()) != size_c:
        raise ValueError("matrix sizes must equal their per-row byte sums")
    if row_bytes_a.shape != row_bytes_c.shape:
        raise DimensionError("A and C must have the same row count")
    if fast_size <= 0:
        raise ValueError("fast_size must be positive")

    big = 3 * fast_size // 4
    combined_ac = row_bytes_a + row_bytes_c

    if size_b < big:
        # B fits whole; its leftover grows the A/C portion.
        ac_portion = fast_size - size_b
        p_b = singleton_partition(row_bytes_b)
        p_ac = balanced_partition(combined_ac, ac_portion)
        cost = copy_cost_chunk2(size_a, size_b, size_c, len(p_b))
        return ChunkPlan(GPU_CHUNK2_B_IN_PLACE, p_b, p_ac, cost, heuristic_branch=1)

    if size_a + size_c < big:
        b_portion = fast_size - (size_a + size_c)
        p_ac = singleton_partition(combined_ac)
        p_b = balanced_partition(row_bytes_b, b_portion)
        cost = copy_cost_chunk1(size_a, size_b, size_c, len(p_ac))
        return ChunkPlan(GPU_CHUNK1_AC_IN_PLACE, p_b, p_ac, cost, heuristic_branch=2)

    if size_a + 2 * size_c > size_b:
        p_ac = balanced_partition(combined_ac, big)
        b_portion = fast_size - p_ac.max_range_bytes
        if b_portion <= 0:
            raise CapacityError("no room left for B chunks in %d bytes" % fast_size)
        p_b = balanced_partition(row_bytes_b, b_portion)
        branch = 3
    else:
        p_b = balanced_partition(row_bytes_b, big)
        ac_portion = fast_size - p_b.max_range_bytes
        if ac_portion <= 0:
            raise CapacityError("no room left for A/C chunks in %d bytes" % fast_size)
        p_ac = balanced_partition(combined_ac, ac_portion)
        branch = 4

    cost1 = copy_cost_chunk1(size_a, size_b, size_c, len(p_ac))
    cost2 = copy_cost_chunk2(size_a, size_b, size_c, len(p_b))
    if cost1 <= cost2:
        return ChunkPlan(GPU_CHUNK1_AC_IN_PLACE, p_b, p_ac, cost1, heuristic_branch=branch)
    return ChunkPlan(GPU_CHUNK2_B_IN_PLACE, p_b, p_ac, cost2, heuristic_branch=branch)


def plan_for_multiply(a: CsrMatrix, b: CsrMatrix, c_counts, fast_size: int) -> ChunkPlan:
    """decide_chunking applied to concrete operands and symbolic counts."""
    row_a = a.row_byte_sizes()
    row_b = b.row_byte_sizes()
    row_c = c_row_byte_sizes(a.num_rows, c_counts)
    return decide_chunking(int(row_a.sum()), int(row_b.sum()), int(row_c.sum()),
                           row_a, row_b, row_c, fast_size)


def execute_plan(a: CsrMatrix, b: CsrMatrix, c_counts, plan: ChunkPlan,
                 model: MemoryModel, workers: int = 1):
    """Run a ChunkPlan and return (C, ledger)."""
    if plan.algorithm == GPU_CHUNK1_AC_IN_PLACE:
        return gpu_chunk_multiply_1(a, b, c_counts, plan.partition_ac,
                                    plan.partition_b, model, workers=workers)
    if plan.algorithm == GPU_CHUNK2_B_IN_PLACE:
        return gpu_chunk_multiply_2(a, b, c_counts, plan.partition_ac,
                                    plan.partition_b, model, workers=workers)
    if plan.algorithm == KNL_CHUNK:
        fast_size = model.fast.capacity
        if fast_size is None:
            raise ValueError("KNL chunk execution needs a finite fast capacity")
        return knl_chunk_multiply(a, b, c_counts, fast_size, model, workers=workers)
    raise ValueError("unknown chunk algorithm %r" % plan.algorithm)
