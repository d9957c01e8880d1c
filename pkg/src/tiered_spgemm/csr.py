"""Compressed sparse row matrix type and structural utilities.

Offsets and indices are 64-bit integers throughout; values are float64.
Column indices within a row are not required to be sorted anywhere in the
package, and the multiply kernels never assume they are.

Byte accounting convention: ``byte_size`` counts the full offset array
(``num_rows + 1`` entries) plus 8 bytes per stored index and, when values
are present, 8 bytes per stored value.  ``row_byte_sizes`` distributes the
same total over rows: each row carries its trailing offset entry, and the
leading offset entry rides with row 0.  This makes per-row byte vectors sum
to ``byte_size`` exactly, which the chunking ledger arithmetic relies on.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, MatrixValidationError

OFFSET_BYTES = 8
INDEX_BYTES = 8
VALUE_BYTES = 8


def _frozen(arr, dtype):
    out = np.array(arr, dtype=dtype, copy=True)
    out.flags.writeable = False
    return out


@dataclass
class CsrMatrix:
    """CSR matrix; ``values`` is None for pattern-only matrices.

    Instances are immutable: the backing arrays are frozen at construction
    so they can be shared freely across threads.
    """

    num_rows: int
    num_cols: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray | None = None

    def __post_init__(self):
        self.row_ptr = _frozen(self.row_ptr, np.int64)
        self.col_idx = _frozen(self.col_idx, np.int64)
        if self.values is not None:
            self.values = _frozen(self.values, np.float64)

    @property
    def nnz(self) -> int:
        return int(self.col_idx.shape[0])

    @property
    def is_pattern(self) -> bool:
        return self.values is None

    @property
    def entry_bytes(self) -> int:
        """Bytes per stored entry: index plus value, or index only for patterns."""
        return INDEX_BYTES if self.values is None else INDEX_BYTES + VALUE_BYTES

    @property
    def byte_size(self) -> int:
        return OFFSET_BYTES * (self.num_rows + 1) + self.entry_bytes * self.nnz

    def row_nnz(self) -> np.ndarray:
        return np.diff(self.row_ptr)

    def row_byte_sizes(self) -> np.ndarray:
        per_row = self.row_nnz() * self.entry_bytes + OFFSET_BYTES
        per_row = np.array(per_row, dtype=np.int64)
        if self.num_rows > 0:
            per_row[0] += OFFSET_BYTES
        return per_row

    def row(self, i: int):
        """(columns, values) views of row i; values part is None for patterns."""
        lo, hi = int(self.row_ptr[i]), int(self.row_ptr[i + 1])
        vals = None if self.values is None else self.values[lo:hi]
        return self.col_idx[lo:hi], vals

    @staticmethod
    def from_coo(rows, cols, vals, num_rows: int, num_cols: int) -> "CsrMatrix":
        """Build from coordinate triplets, sorting rows and columns."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        order = np.lexsort((cols, rows))
        row_ptr = np.zeros(num_rows + 1, dtype=np.int64)
        np.add.at(row_ptr, rows + 1, 1)
        np.cumsum(row_ptr, out=row_ptr)
        values = None if vals is None else np.asarray(vals, dtype=np.float64)[order]
        return CsrMatrix(num_rows, num_cols, row_ptr, cols[order], values)

    @staticmethod
    def empty(num_rows: int, num_cols: int, pattern: bool = False) -> "CsrMatrix":
        values = None if pattern else np.empty(0, dtype=np.float64)
        return CsrMatrix(num_rows, num_cols,
                         np.zeros(num_rows + 1, dtype=np.int64),
                         np.empty(0, dtype=np.int64), values)

    @staticmethod
    def identity(n: int) -> "CsrMatrix":
        return CsrMatrix(n, n, np.arange(n + 1), np.arange(n), np.ones(n))


def validate(m: CsrMatrix, reject_duplicates: bool = True) -> None:
    """Check every CsrMatrix invariant, raising MatrixValidationError on failure."""
    if m.num_rows < 0 or m.num_cols < 0:
        raise MatrixValidationError("negative dimensions")
    if m.row_ptr.shape[0] != m.num_rows + 1:
        raise MatrixValidationError("row_ptr length must be num_rows + 1")
    if m.row_ptr[0] != 0:
        raise MatrixValidationError("row_ptr[0] must be 0")
    if np.any(np.diff(m.row_ptr) < 0):
        raise MatrixValidationError("row_ptr must be non-decreasing")
    if int(m.row_ptr[-1]) != m.nnz:
        raise MatrixValidationError("row_ptr[num_rows] must equal nnz")
    if m.values is not None and m.values.shape[0] != m.nnz:
        raise MatrixValidationError("values length must equal nnz")
    if m.nnz:
        if int(m.col_idx.min()) < 0 or int(m.col_idx.max()) >= m.num_cols:
            raise MatrixValidationError("column index out of range")
    if reject_duplicates and m.nnz:
        rows = np.repeat(np.arange(m.num_rows), m.row_nnz())
        order = np.lexsort((m.col_idx, rows))
        r, c = rows[order], m.col_idx[order]
        if np.any((r[1:] == r[:-1]) & (c[1:] == c[:-1])):
            raise MatrixValidationError("duplicate column index within a row")


def transpose(m: CsrMatrix) -> CsrMatrix:
    """Exact structural and numeric transpose."""
    counts = np.bincount(m.col_idx, minlength=m.num_cols)
    row_ptr = np.zeros(m.num_cols + 1, dtype=np.int64)
    np.cumsum(counts, out=row_ptr[1:])
    order = np.argsort(m.col_idx, kind="stable")
    rows = np.repeat(np.arange(m.num_rows), m.row_nnz())
    values = None if m.values is None else m.values[order]
    return CsrMatrix(m.num_cols, m.num_rows, row_ptr, rows[order], values)


def canonicalize(m: CsrMatrix) -> CsrMatrix:
    """Copy with each row's columns sorted ascending."""
    rows = np.repeat(np.arange(m.num_rows), m.row_nnz())
    order = np.lexsort((m.col_idx, rows))
    values = None if m.values is None else m.values[order]
    return CsrMatrix(m.num_rows, m.num_cols, m.row_ptr, m.col_idx[order], values)


def matrices_equal(a: CsrMatrix, b: CsrMatrix) -> bool:
    """Exact equality of canonical forms (pattern and values)."""
    if (a.num_rows, a.num_cols, a.nnz) != (b.num_rows, b.num_cols, b.nnz):
        return False
    ca, cb = canonicalize(a), canonicalize(b)
    if not (np.array_equal(ca.row_ptr, cb.row_ptr) and np.array_equal(ca.col_idx, cb.col_idx)):
        return False
    if (ca.values is None) != (cb.values is None):
        return False
    return ca.values is None or bool(np.array_equal(ca.values, cb.values))


def products_match(actual: CsrMatrix, reference: CsrMatrix, rtol: float = 1e-12):
    """Compare two numeric products: identical nonzero sets per row, values
    within a symmetric per-entry relative tolerance.

    Returns (ok, max_relative_difference).
    """
    if (actual.num_rows, actual.num_cols) != (reference.num_rows, reference.num_cols):
        return False, float("inf")
    if actual.nnz != reference.nnz:
        return False, float("inf")
    ca, cr = canonicalize(actual), canonicalize(reference)
    if not (np.array_equal(ca.row_ptr, cr.row_ptr) and np.array_equal(ca.col_idx, cr.col_idx)):
        return False, float("inf")
    if ca.nnz == 0:
        return True, 0.0
    diff = np.abs(ca.values - cr.values)
    scale = np.maximum(np.abs(ca.values), np.abs(cr.values))
    rel = np.where(diff == 0.0, 0.0, diff / np.where(scale == 0.0, 1.0, scale))
    max_rel = float(rel.max())
    return bool(np.all((rel <= rtol) | (diff <= 1e-250))), max_rel


def slice_rows(m: CsrMatrix, begin: int, end: int) -> CsrMatrix:
    """Row slice [begin, end) as a rebased CsrMatrix over the same column space."""
    if not (0 <= begin <= end <= m.num_rows):
        raise DimensionError("row slice [%d, %d) out of range" % (begin, end))
    lo, hi = int(m.row_ptr[begin]), int(m.row_ptr[end])
    values = None if m.values is None else m.values[lo:hi]
    return CsrMatrix(end - begin, m.num_cols,
                     m.row_ptr[begin:end + 1] - m.row_ptr[begin],
                     m.col_idx[lo:hi], values)
