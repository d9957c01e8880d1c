"""Triangle counting via degree ordering and the masked multiply kernel.

The graph's adjacency pattern is permuted into non-decreasing degree
order, its strictly lower triangle is extracted, and the compressed masked
intersect-count kernel sums |N(j) & N(i)| over the triangle's entries.
Each triangle is counted exactly once; the ordering is a performance
choice and never changes the count.
"""

import numpy as np

from .csr import CsrMatrix, canonicalize, transpose
from .errors import GraphError
from .kernel import compress, masked_row_intersect_count
from .matrix_market import read_matrix_market


def validate_graph(g: CsrMatrix) -> None:
    """Require a square, symmetric-pattern, loop-free matrix."""
    if g.num_rows != g.num_cols:
        raise GraphError("graph matrix must be square")
    rows = np.repeat(np.arange(g.num_rows), g.row_nnz())
    if np.any(rows == g.col_idx):
        raise GraphError("graph matrix must have an empty diagonal")
    c = canonicalize(g)
    t = canonicalize(transpose(g))
    if not (np.array_equal(c.row_ptr, t.row_ptr) and np.array_equal(c.col_idx, t.col_idx)):
        raise GraphError("graph pattern must be symmetric")


def degree_sort_permutation(g: CsrMatrix) -> np.ndarray:
    """Vertices ordered by non-decreasing degree, ties by original index."""
    degrees = g.row_nnz()
    return np.lexsort((np.arange(g.num_rows), degrees))


def lower_triangle(g: CsrMatrix, perm) -> CsrMatrix:
    """Strictly lower triangular pattern of g in the permuted labelling."""
    validate_graph(g)
    perm = np.asarray(perm, dtype=np.int64)
    pos = np.empty(g.num_rows, dtype=np.int64)
    pos[perm] = np.arange(g.num_rows)
    rows = pos[np.repeat(np.arange(g.num_rows), g.row_nnz())]
    cols = pos[g.col_idx]
    keep = rows > cols
    return CsrMatrix.from_coo(rows[keep], cols[keep], None, g.num_rows, g.num_rows)


def count_triangles(g: CsrMatrix, workers: int = 1) -> int:
    """Exact triangle count of an undirected graph matrix."""
    perm = degree_sort_permutation(g)
    l = lower_triangle(g, perm)
    return masked_row_intersect_count(l, compress(l), workers=workers)


def to_undirected_pattern(m: CsrMatrix) -> CsrMatrix:
    """Symmetrize, deduplicate, and drop self loops from an adjacency pattern."""
    if m.num_rows != m.num_cols:
        raise GraphError("adjacency matrix must be square")
    rows = np.repeat(np.arange(m.num_rows), m.row_nnz())
    cols = m.col_idx
    u = np.concatenate([rows, cols])
    v = np.concatenate([cols, rows])
    keep = u != v
    u, v = u[keep], v[keep]
    n = m.num_rows
    unique = np.unique(u * n + v)
    return CsrMatrix.from_coo(unique // n, unique % n, None, n, n)


def read_edge_list(path) -> CsrMatrix:
    """Plain whitespace-separated edge list, one ``u v`` pair per line.

    A third column (weights) is tolerated and ignored; ``#`` and ``%``
    lines are comments.  Zero- versus one-based ids are autodetected from
    the minimum index seen.
    """
    us, vs = [], []
    with open(path, "r", encoding="ascii") as fh:
        for line in fh:
            stripped = line.strip()
            if not stripped or stripped[0] in "#%":
                continue
            parts = stripped.split()
            if len(parts) not in (2, 3):
                raise GraphError("bad edge line %r" % stripped)
            try:
                us.append(int(parts[0]))
                vs.append(int(parts[1]))
            except ValueError:
                raise GraphError("non-integer vertex id in %r" % stripped)
    if not us:
        return CsrMatrix.empty(0, 0, pattern=True)
    us = np.asarray(us, dtype=np.int64)
    vs = np.asarray(vs, dtype=np.int64)
    lo = int(min(us.min(), vs.min()))
    if lo < 0:
        raise GraphError("negative vertex id")
    if lo >= 1:
        us -= 1
        vs -= 1
    n = int(max(us.max(), vs.max())) + 1
    adj = CsrMatrix.from_coo(np.concatenate([us, vs]), np.concatenate([vs, us]),
                             None, n, n)
    # from_coo keeps duplicates; squash them together with any self loops.
    return to_undirected_pattern(adj)


def load_graph(path) -> CsrMatrix:
    """Graph from a Matrix Market file or an edge list, symmetrized and cleaned."""
    text = str(path)
    if text.endswith(".mtx") or text.endswith(".mm"):
        return to_undirected_pattern(read_matrix_market(text))
    return read_edge_list(text)
