"""Deterministic problem generators: grid stencil matrices, geometric
interpolation/restriction pairs, and seeded random right-hand sides.

Stencil values are standard second-order finite-difference weights (the
center entry balances the neighbor count of a full interior row, so rows
sum to zero away from the boundary).  The elasticity operator couples the
three degrees of freedom per grid point through a dense symmetric 3x3
block, giving 27 * 3 = 81 entries on interior rows.
"""

from dataclasses import dataclass

import numpy as np

from .csr import CsrMatrix, transpose, validate
from .errors import GridError
from .rng import PortableRng

LAPLACE3D = "laplace3d"
BIGSTAR2D = "bigstar2d"
BRICK3D = "brick3d"
ELASTICITY3D = "elasticity3d"

STENCIL_KINDS = (LAPLACE3D, BIGSTAR2D, BRICK3D, ELASTICITY3D)

# Offset stencils as (shift per axis) -> weight.  The 2D big star couples
# the four axial neighbors at distances one and two plus the four diagonal
# neighbors: 13 points.
_LAPLACE3D_OFFSETS = [((0, 0, 0), 6.0),
                      ((-1, 0, 0), -1.0), ((1, 0, 0), -1.0),
                      ((0, -1, 0), -1.0), ((0, 1, 0), -1.0),
                      ((0, 0, -1), -1.0), ((0, 0, 1), -1.0)]
_BIGSTAR2D_OFFSETS = [((0, 0), 12.0)] + [
    ((dx, dy), -1.0)
    for dx, dy in [(-1, 0), (1, 0), (0, -1), (0, 1),
                   (-2, 0), (2, 0), (0, -2), (0, 2),
                   (-1, -1), (-1, 1), (1, -1), (1, 1)]
]
_BRICK3D_OFFSETS = [((0, 0, 0), 26.0)] + [
    ((dx, dy, dz), -1.0)
    for dx in (-1, 0, 1) for dy in (-1, 0, 1) for dz in (-1, 0, 1)
    if (dx, dy, dz) != (0, 0, 0)
]

# Dense symmetric coupling block for elasticity: identity plus a uniform
# rank-style tie between the three displacement components.
_ELASTICITY_BLOCK = np.eye(3) + 0.5 * np.ones((3, 3))


@dataclass(frozen=True)
class StencilSpec:
    """A stencil family and per-axis grid point counts."""

    kind: str
    grid_dims: tuple

    def __post_init__(self):
        if self.kind not in STENCIL_KINDS:
            raise GridError("unknown stencil kind %r" % (self.kind,))
        dims = tuple(int(d) for d in self.grid_dims)
        object.__setattr__(self, "grid_dims", dims)
        if any(d <= 0 for d in dims):
            raise GridError("grid dims must be positive")
        want = 2 if self.kind == BIGSTAR2D else 3
        if len(dims) != want:
            raise GridError("%s needs %d grid dims, got %d"
                            % (self.kind, want, len(dims)))

    @property
    def rank(self) -> int:
        return len(self.grid_dims)

    @property
    def dofs_per_point(self) -> int:
        return 3 if self.kind == ELASTICITY3D else 1

    @property
    def num_points(self) -> int:
        return int(np.prod(self.grid_dims))

    @property
    def matrix_rows(self) -> int:
        return self.num_points * self.dofs_per_point


def _coords(dims):
    """Per-axis coordinates of every flat grid index (first axis fastest)."""
    n = int(np.prod(dims))
    idx = np.arange(n, dtype=np.int64)
    coords = []
    div = 1
    for d in dims:
        coords.append((idx // div) % d)
        div *= d
    return idx, coords


def _scalar_stencil_entries(dims, offsets):
    idx, coords = _coords(dims)
    strides = np.cumprod([1] + list(dims[:-1]))
    rows, cols, vals = [], [], []
    for shift, weight in offsets:
        mask = np.ones(idx.shape[0], dtype=bool)
        for ax, s in enumerate(shift):
            if s:
                mask &= (coords[ax] + s >= 0) & (coords[ax] + s < dims[ax])
        r = idx[mask]
        lin_shift = int(np.dot(shift, strides))
        rows.append(r)
        cols.append(r + lin_shift)
        vals.append(np.full(r.shape[0], weight))
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)


def generate_stencil(spec: StencilSpec) -> CsrMatrix:
    """Symmetric grid operator for the given stencil family.

    Interior rows carry exactly 7 (laplace3d), 13 (bigstar2d), 27 (brick3d)
    or 81 (elasticity3d) nonzeros; boundary rows lose the neighbors that
    fall off the grid.
    """
    if any(d < 5 for d in spec.grid_dims):
        raise GridError("stencil grids need every dim >= 5")
    if spec.kind == LAPLACE3D:
        rows, cols, vals = _scalar_stencil_entries(spec.grid_dims, _LAPLACE3D_OFFSETS)
    elif spec.kind == BIGSTAR2D:
        rows, cols, vals = _scalar_stencil_entries(spec.grid_dims, _BIGSTAR2D_OFFSETS)
    else:
        rows, cols, vals = _scalar_stencil_entries(spec.grid_dims, _BRICK3D_OFFSETS)

    if spec.kind == ELASTICITY3D:
        d = np.arange(3)
        row_off = np.repeat(d, 3)
        col_off = np.tile(d, 3)
        rows = (3 * rows[:, None] + row_off[None, :]).ravel()
        cols = (3 * cols[:, None] + col_off[None, :]).ravel()
        vals = (vals[:, None] * _ELASTICITY_BLOCK.ravel()[None, :]).ravel()

    n = spec.matrix_rows
    m = CsrMatrix.from_coo(rows, cols, vals, n, n)
    validate(m)
    return m


def stencil_nnz(kind: str, grid_dims) -> int:
    """Exact nonzero count of generate_stencil without building the matrix.

    Each offset contributes one entry per grid point whose shifted neighbor
    stays inside the grid.
    """
    spec = StencilSpec(kind, tuple(grid_dims))
    offsets = {LAPLACE3D: _LAPLACE3D_OFFSETS, BIGSTAR2D: _BIGSTAR2D_OFFSETS,
               BRICK3D: _BRICK3D_OFFSETS, ELASTICITY3D: _BRICK3D_OFFSETS}[spec.kind]
    total = 0
    for shift, _ in offsets:
        count = 1
        for ax, s in enumerate(shift):
            count *= max(spec.grid_dims[ax] - abs(s), 0)
        total += count
    return total * spec.dofs_per_point ** 2


def stencil_byte_size(kind: str, grid_dims) -> int:
    spec = StencilSpec(kind, tuple(grid_dims))
    return 8 * (spec.matrix_rows + 1) + 16 * stencil_nnz(kind, grid_dims)


def grid_for_target_bytes(kind: str, target_bytes: int, max_dim: int = 513):
    """Smallest odd cubic (square for 2D kinds) grid whose stencil matrix
    reaches target_bytes."""
    rank = 2 if kind == BIGSTAR2D else 3
    n = 5
    while n <= max_dim:
        dims = (n,) * rank
        if stencil_byte_size(kind, dims) >= target_bytes:
            return dims
        n += 2
    raise GridError("no grid up to %d^%d reaches %d bytes"
                    % (max_dim, rank, target_bytes))


def _axis_interpolation(n: int):
    """Per-coordinate (coarse index, weight) lists for one axis of n points.

    Coarse points sit on even coordinates; odd points average their two
    coarse neighbors.
    """
    table = []
    for x in range(n):
        if x % 2 == 0:
            table.append(((x // 2, 1.0),))
        else:
            table.append(((x // 2, 0.5), (x // 2 + 1, 0.5)))
    return table, (n + 1) // 2


def generate_interpolation(spec: StencilSpec):
    """(P, R) for coarsening the given grid by two along every axis.

    P interpolates coarse values to the fine grid (bilinear in 2D,
    trilinear in 3D, per degree of freedom); R is exactly transpose(P).
    """
    dims = spec.grid_dims
    for d in dims:
        if d < 3 or d % 2 == 0:
            raise GridError("interpolation needs odd grid dims >= 3, got %r" % (dims,))

    tables = []
    coarse_dims = []
    for d in dims:
        table, nc = _axis_interpolation(d)
        tables.append(table)
        coarse_dims.append(nc)

    idx, coords = _coords(dims)
    coarse_strides = np.cumprod([1] + coarse_dims[:-1])
    rows, cols, vals = [], [], []
    n_points = spec.num_points
    for i in range(n_points):
        axis_entries = [tables[ax][int(coords[ax][i])] for ax in range(len(dims))]
        partial = [(0, 1.0)]
        for ax, entries in enumerate(axis_entries):
            stride = int(coarse_strides[ax])
            partial = [(base + stride * ci, w * wi)
                       for base, w in partial for ci, wi in entries]
        for c, w in partial:
            rows.append(i)
            cols.append(c)
            vals.append(w)

    dofs = spec.dofs_per_point
    n_coarse = int(np.prod(coarse_dims))
    if dofs > 1:
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        d = np.arange(dofs)
        rows = (dofs * rows[:, None] + d[None, :]).ravel()
        cols = (dofs * cols[:, None] + d[None, :]).ravel()
        vals = np.repeat(vals, dofs)

    p = CsrMatrix.from_coo(rows, cols, vals, n_points * dofs, n_coarse * dofs)
    validate(p)
    r = transpose(p)
    return p, r


def generate_random_rhs(num_rows: int, num_cols: int, delta: int, seed: int) -> CsrMatrix:
    """Random matrix with exactly ``delta`` nonzeros per row.

    Columns are drawn uniformly without replacement from the seeded
    portable generator and kept in draw order (unsorted); values are
    uniform in (0, 1].  Identical (seed, shape, delta) reproduces the
    matrix bit for bit.
    """
    if delta > num_cols:
        raise GridError("delta %d exceeds %d columns" % (delta, num_cols))
    if delta < 0 or num_rows < 0:
        raise GridError("shape and delta must be non-negative")
    rng = PortableRng(seed)
    cols = np.empty(num_rows * delta, dtype=np.int64)
    vals = np.empty(num_rows * delta, dtype=np.float64)
    pos = 0
    for _ in range(num_rows):
        for c in rng.sample_without_replacement(num_cols, delta):
            cols[pos] = c
            vals[pos] = rng.uniform_open_closed()
            pos += 1
    row_ptr = np.arange(num_rows + 1, dtype=np.int64) * delta
    m = CsrMatrix(num_rows, num_cols, row_ptr, cols, vals)
    validate(m)
    return m
