"""Exception hierarchy shared by all modules."""


class TieredSpgemmError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(TieredSpgemmError):
    """Operand shapes are incompatible for the requested operation."""


class MatrixValidationError(TieredSpgemmError):
    """A CSR matrix violates its structural invariants."""


class MatrixMarketError(TieredSpgemmError):
    """Malformed or unsupported Matrix Market content."""


class GridError(TieredSpgemmError):
    """A problem-generator spec is inconsistent (wrong rank, even dims, too small)."""


class UnsplittableRowError(TieredSpgemmError):
    """A single row is larger than the capacity it must fit into."""


class CapacityError(TieredSpgemmError):
    """A simulated memory space would exceed its capacity."""


class KernelError(TieredSpgemmError):
    """Internal kernel inconsistency, e.g. accumulator overflow past the symbolic bound."""


class PlacementError(TieredSpgemmError):
    """A placement policy assigns more bytes to a space than it can hold."""


class GraphError(TieredSpgemmError):
    """Input is not a valid undirected, loop-free graph matrix."""


class VerifyError(TieredSpgemmError):
    """A --verify run produced a result that differs from the plain kernel."""
