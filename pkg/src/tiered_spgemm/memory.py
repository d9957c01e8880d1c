"""Two-level memory cost model, placement policies, copy ledger, access stats.

This is a linear traffic and latency model, not a cache simulator: every
modelled access pays its space's bandwidth, and temporal locality effects
are out of model.  A transfer between spaces pays the slower endpoint's
bandwidth plus a single initiation latency.  The shipped presets are model
inputs for trend comparisons at desk scale, not claims about any hardware.
"""

import json
import threading
from dataclasses import dataclass, field

import numpy as np

from .csr import CsrMatrix
from .errors import CapacityError, DimensionError, PlacementError
from .kernel import count_multiplications

FAST = "fast"
SLOW = "slow"

DEFAULT_INSERT_SECONDS = 1e-9


@dataclass(frozen=True)
class MemorySpaceSpec:
    """One memory tier: byte capacity (None = unbounded), bandwidth, latency."""

    name: str
    capacity: int | None
    bandwidth: float
    latency: float

    def __post_init__(self):
        if self.bandwidth <= 0:
            raise ValueError("bandwidth must be positive")
        if self.latency < 0:
            raise ValueError("latency must be non-negative")
        if self.capacity is not None and self.capacity < 0:
            raise ValueError("capacity must be non-negative")


def default_fast(capacity: int | None = 16 * 2**30) -> MemorySpaceSpec:
    return MemorySpaceSpec(FAST, capacity, 400e9, 1e-7)


def default_slow() -> MemorySpaceSpec:
    return MemorySpaceSpec(SLOW, None, 20e9, 1e-6)


@dataclass(frozen=True)
class MemoryModel:
    fast: MemorySpaceSpec
    slow: MemorySpaceSpec

    def __post_init__(self):
        if self.fast.capacity is None:
            raise ValueError("the fast space needs a finite capacity")

    def space(self, name: str) -> MemorySpaceSpec:
        if name == self.fast.name:
            return self.fast
        if name == self.slow.name:
            return self.slow
        raise KeyError(name)

    def transfer_seconds(self, n_bytes: int, src: str, dst: str) -> float:
        """One initiation latency plus bytes over the slower endpoint's bandwidth."""
        a, b = self.space(src), self.space(dst)
        return max(a.latency, b.latency) + n_bytes / min(a.bandwidth, b.bandwidth)


def default_model(fast_capacity: int | None = 16 * 2**30) -> MemoryModel:
    return MemoryModel(default_fast(fast_capacity), default_slow())


@dataclass(frozen=True)
class CopyEvent:
    bytes: int
    src: str
    dst: str
    seconds: float
    tag: str = ""


class CopyLedger:
    """Append-only ordered log of simulated transfers with residency tracking.

    Billed event bytes and physical residency are tracked separately:
    ``alloc``/``free`` adjust how many bytes a space currently holds (checked
    against capacity on every call), while ``record`` appends a billed copy
    event.  ``simulate_copy`` combines the two for the common case.
    """

    def __init__(self, model: MemoryModel):
        self.model = model
        self.events: list[CopyEvent] = []
        self._residency = {model.fast.name: 0, model.slow.name: 0}
        self._peak = {model.fast.name: 0, model.slow.name: 0}
        self._lock = threading.Lock()

    def alloc(self, space: str, n_bytes: int) -> None:
        with self._lock:
            spec = self.model.space(space)
            new = self._residency[space] + int(n_bytes)
            if spec.capacity is not None and new > spec.capacity:
                raise CapacityError("%s would hold %d bytes, capacity %d"
                                    % (space, new, spec.capacity))
            self._residency[space] = new
            self._peak[space] = max(self._peak[space], new)

    def free(self, space: str, n_bytes: int) -> None:
        with self._lock:
            self._residency[space] -= int(n_bytes)
            if self._residency[space] < 0:
                raise ValueError("negative residency in %s" % space)

    def record(self, n_bytes: int, src: str, dst: str, tag: str = "") -> float:
        seconds = self.model.transfer_seconds(int(n_bytes), src, dst)
        with self._lock:
            self.events.append(CopyEvent(int(n_bytes), src, dst, seconds, tag))
        return seconds

    def residency(self, space: str) -> int:
        return self._residency[space]

    def peak_residency(self, space: str) -> int:
        return self._peak[space]

    @property
    def total_seconds(self) -> float:
        return sum(e.seconds for e in self.events)

    def total_bytes(self, src: str | None = None, dst: str | None = None) -> int:
        return sum(e.bytes for e in self.events
                   if (src is None or e.src == src) and (dst is None or e.dst == dst))

    def events_tagged(self, tag: str) -> list[CopyEvent]:
        return [e for e in self.events if e.tag == tag]

    def to_json_lines(self) -> str:
        lines = [json.dumps({"bytes": e.bytes, "src": e.src, "dst": e.dst,
                             "seconds": e.seconds, "tag": e.tag})
                 for e in self.events]
        return "\n".join(lines) + ("\n" if lines else "")

    def summary(self) -> dict:
        return {
            "events": len(self.events),
            "bytes_slow_to_fast": self.total_bytes(SLOW, FAST),
            "bytes_fast_to_slow": self.total_bytes(FAST, SLOW),
            "total_bytes": self.total_bytes(),
            "seconds": self.total_seconds,
            "peak_fast_residency": self.peak_residency(FAST),
        }


def simulate_copy(n_bytes: int, src: str, dst: str, ledger: CopyLedger) -> float:
    """Move n_bytes from src to dst: allocates in dst, appends a billed event."""
    ledger.alloc(dst, n_bytes)
    return ledger.record(n_bytes, src, dst)


@dataclass
class AccessStats:
    """Analytic access counts of one multiply C = A * B.

    b_row_reads[j] is the number of nonzeros in column j of A: each such
    entry walks B's row j once.  A is streamed (each entry read once), C is
    written once per output entry, and the accumulators absorb one insert
    per scalar multiplication.
    """

    a_entry_reads: int
    b_row_reads: np.ndarray
    c_entry_writes: int
    accumulator_inserts: int


def compute_access_stats(a: CsrMatrix, b: CsrMatrix, c_counts) -> AccessStats:
    if a.num_cols != b.num_rows:
        raise DimensionError("A has %d cols but B has %d rows" % (a.num_cols, b.num_rows))
    reads = np.bincount(a.col_idx, minlength=b.num_rows).astype(np.int64)
    return AccessStats(
        a_entry_reads=a.nnz,
        b_row_reads=reads,
        c_entry_writes=int(np.asarray(c_counts, dtype=np.int64).sum()),
        accumulator_inserts=count_multiplications(a, b),
    )


ALL_FAST = "all_fast"
ALL_SLOW = "all_slow"
B_IN_FAST = "b_in_fast"
CHUNKED = "chunked"

POLICY_NAMES = (ALL_FAST, ALL_SLOW, B_IN_FAST, CHUNKED)


@dataclass(frozen=True)
class PlacementPolicy:
    """Assignment of each operand of C = A * B to a memory space."""

    name: str
    spaces: dict = field(default_factory=dict)

    @staticmethod
    def from_name(name: str) -> "PlacementPolicy":
        if name == ALL_FAST:
            return PlacementPolicy(name, {"A": FAST, "B": FAST, "C": FAST})
        if name == ALL_SLOW:
            return PlacementPolicy(name, {"A": SLOW, "B": SLOW, "C": SLOW})
        if name == B_IN_FAST:
            return PlacementPolicy(name, {"A": SLOW, "B": FAST, "C": SLOW})
        if name == CHUNKED:
            # Chunk copies are accounted by the ledger; during compute every
            # operand range is resident in fast space.
            return PlacementPolicy(name, {"A": FAST, "B": FAST, "C": FAST})
        raise ValueError("unknown placement policy %r" % name)

    def space_of(self, operand: str) -> str:
        return self.spaces[operand]


def validate_placement(policy: PlacementPolicy, size_a: int, size_b: int,
                       size_c: int, model: MemoryModel) -> None:
    """Check that statically placed matrices fit their space (chunked is exempt)."""
    if policy.name == CHUNKED:
        return
    load = {FAST: 0, SLOW: 0}
    for operand, size in (("A", size_a), ("B", size_b), ("C", size_c)):
        load[policy.space_of(operand)] += size
    for space, used in load.items():
        cap = model.space(space).capacity
        if cap is not None and used > cap:
            raise PlacementError("policy %s puts %d bytes in %s (capacity %d)"
                                 % (policy.name, used, space, cap))


def estimate_kernel_time(stats: AccessStats, policy: PlacementPolicy,
                         model: MemoryModel, *, size_a: int, size_c: int,
                         row_bytes_b: np.ndarray,
                         insert_seconds: float = DEFAULT_INSERT_SECONDS) -> float:
    """Linear traffic estimate of one multiply under a placement.

    A and C are streamed once; each B row is charged once per read; every
    accumulator insert costs a fixed constant.  Monotone in every count and
    in each space's bandwidth.
    """
    bw_a = model.space(policy.space_of("A")).bandwidth
    bw_b = model.space(policy.space_of("B")).bandwidth
    bw_c = model.space(policy.space_of("C")).bandwidth
    b_traffic = int(np.dot(stats.b_row_reads, np.asarray(row_bytes_b, dtype=np.int64)))
    return (size_a / bw_a + b_traffic / bw_b + size_c / bw_c
            + stats.accumulator_inserts * insert_seconds)
