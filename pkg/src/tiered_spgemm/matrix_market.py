"""Matrix Market coordinate-format reader and writer.

Reads real, integer, and pattern fields with general or symmetric
symmetry; symmetric inputs are expanded to full storage.  Duplicate
entries are rejected rather than summed, which is why this parser is
hand-rolled.  Files are written in general symmetry with 1-based indices
and shortest round-tripping float representations.
"""

import numpy as np

from .csr import CsrMatrix, validate
from .errors import MatrixMarketError, MatrixValidationError

_HEADER_PREFIX = "%%MatrixMarket"


def read_matrix_market(path) -> CsrMatrix:
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline()
        tokens = header.strip().split()
        if len(tokens) != 5 or tokens[0] != _HEADER_PREFIX:
            raise MatrixMarketError("malformed header: %r" % header.strip())
        _, obj, fmt, field, symmetry = (t.lower() for t in tokens)
        if obj != "matrix" or fmt != "coordinate":
            raise MatrixMarketError("only coordinate matrices are supported")
        if field not in ("real", "integer", "pattern"):
            raise MatrixMarketError("unsupported field %r" % field)
        if symmetry not in ("general", "symmetric"):
            raise MatrixMarketError("unsupported symmetry %r" % symmetry)

        size_line = None
        for line in fh:
            stripped = line.strip()
            if not stripped or stripped.startswith("%"):
                continue
            size_line = stripped
            break
        if size_line is None:
            raise MatrixMarketError("missing size line")
        parts = size_line.split()
        if len(parts) != 3:
            raise MatrixMarketError("size line must be 'rows cols nnz'")
        try:
            num_rows, num_cols, nnz = (int(p) for p in parts)
        except ValueError:
            raise MatrixMarketError("non-integer size line %r" % size_line)
        if num_rows < 0 or num_cols < 0 or nnz < 0:
            raise MatrixMarketError("negative sizes in %r" % size_line)

        pattern = field == "pattern"
        want_tokens = 2 if pattern else 3
        rows = np.empty(nnz, dtype=np.int64)
        cols = np.empty(nnz, dtype=np.int64)
        vals = None if pattern else np.empty(nnz, dtype=np.float64)
        seen = 0
        for line in fh:
            stripped = line.strip()
            if not stripped or stripped.startswith("%"):
                continue
            parts = stripped.split()
            if len(parts) != want_tokens:
                raise MatrixMarketError("bad entry line %r" % stripped)
            if seen >= nnz:
                raise MatrixMarketError("more entries than the size line declares")
            try:
                i = int(parts[0])
                j = int(parts[1])
                v = None if pattern else float(parts[2])
            except ValueError:
                raise MatrixMarketError("unparseable entry %r" % stripped)
            if not (1 <= i <= num_rows and 1 <= j <= num_cols):
                raise MatrixMarketError("entry (%d, %d) out of range" % (i, j))
            rows[seen] = i - 1
            cols[seen] = j - 1
            if not pattern:
                vals[seen] = v
            seen += 1
        if seen != nnz:
            raise MatrixMarketError("size line declares %d entries, found %d"
                                    % (nnz, seen))

    if symmetry == "symmetric":
        off_diag = rows != cols
        mirrored_rows = np.concatenate([rows, cols[off_diag]])
        mirrored_cols = np.concatenate([cols, rows[off_diag]])
        rows, cols = mirrored_rows, mirrored_cols
        if vals is not None:
            vals = np.concatenate([vals, vals[off_diag]])

    m = CsrMatrix.from_coo(rows, cols, vals, num_rows, num_cols)
    try:
        validate(m)
    except MatrixValidationError as exc:
        raise MatrixMarketError(str(exc))
    return m


def write_matrix_market(m: CsrMatrix, path) -> None:
    field = "pattern" if m.is_pattern else "real"
    row_of = np.repeat(np.arange(m.num_rows), m.row_nnz())
    with open(path, "w", encoding="ascii") as fh:
        fh.write("%%%%MatrixMarket matrix coordinate %s general\n" % field)
        fh.write("%d %d %d\n" % (m.num_rows, m.num_cols, m.nnz))
        if m.is_pattern:
            for r, c in zip(row_of.tolist(), m.col_idx.tolist()):
                fh.write("%d %d\n" % (r + 1, c + 1))
        else:
            for r, c, v in zip(row_of.tolist(), m.col_idx.tolist(), m.values.tolist()):
                fh.write("%d %d %s\n" % (r + 1, c + 1, repr(v)))
