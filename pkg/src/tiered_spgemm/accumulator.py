"""Sparse hashmap accumulator backed by a uniform memory pool.

One accumulator merges the contributions to a single output row.  It is an
open-addressing table with linear probing, a power-of-two capacity of at
least twice the row's symbolic bound, and a multiplicative hash masked to
capacity - 1.  Occupied slots are tracked in insertion order, which gives
O(occupied) reset and a deterministic extraction order (first touch wins).

The pool hands out uniform fixed-size slabs from a free list; a slab is
owned by at most one accumulator at a time.  Slab byte sizes model 24 bytes
per slot (8 for the key, 8 for the payload, 8 for the occupancy index),
rounded up to a 64-byte multiple.
"""

import threading

_HASH_MULTIPLIER = 0x9E3779B97F4A7C15
_MASK64 = (1 << 64) - 1
_EMPTY = -1

SLOT_BYTES = 24


def accumulator_capacity(bound: int) -> int:
    """Smallest power of two >= 2 * bound (minimum 1)."""
    need = max(2 * bound, 1)
    return 1 << (need - 1).bit_length()


class MemorySlab:
    __slots__ = ("slots", "byte_size", "keys", "payload", "used")

    def __init__(self, slots: int):
        self.slots = slots
        self.byte_size = -(-slots * SLOT_BYTES // 64) * 64
        self.keys = [_EMPTY] * slots
        self.payload = [0.0] * slots
        self.used = [0] * slots


class MemoryPool:
    """Free list of uniform slabs, each large enough for the worst row."""

    def __init__(self, slots: int):
        if slots < 1:
            raise ValueError("pool slab must have at least one slot")
        self.slots = slots
        self._free = []
        self._outstanding = set()
        self._lock = threading.Lock()
        self.slabs_created = 0

    @classmethod
    def for_row_bound(cls, max_bound: int) -> "MemoryPool":
        return cls(accumulator_capacity(max_bound))

    @property
    def slab_bytes(self) -> int:
        return -(-self.slots * SLOT_BYTES // 64) * 64

    def acquire(self) -> MemorySlab:
        with self._lock:
            slab = self._free.pop() if self._free else MemorySlab(self.slots)
            self._outstanding.add(id(slab))
            self.slabs_created = max(self.slabs_created, len(self._outstanding) + len(self._free))
            return slab

    def release(self, slab: MemorySlab) -> None:
        with self._lock:
            if id(slab) not in self._outstanding:
                raise ValueError("slab was not acquired from this pool")
            self._outstanding.remove(id(slab))
            self._free.append(slab)


class HashmapAccumulator:
    """Insert-or-combine table over a slab prefix of ``capacity`` slots."""

    __slots__ = ("slab", "capacity", "_mask", "_n_used")

    def __init__(self, slab: MemorySlab, capacity: int):
        if capacity & (capacity - 1):
            raise ValueError("capacity must be a power of two")
        if capacity > slab.slots:
            raise ValueError("capacity exceeds slab size")
        self.slab = slab
        self.capacity = capacity
        self._mask = capacity - 1
        self._n_used = 0

    @property
    def occupied(self) -> int:
        return self._n_used

    def add(self, key: int, value: float) -> None:
        """Numeric insert-or-add keyed on an output column index."""
        keys = self.slab.keys
        idx = ((key * _HASH_MULTIPLIER) & _MASK64) & self._mask
        while True:
            k = keys[idx]
            if k == key:
                self.slab.payload[idx] += value
                return
            if k == _EMPTY:
                keys[idx] = key
                self.slab.payload[idx] = value
                self.slab.used[self._n_used] = idx
                self._n_used += 1
                return
            idx = (idx + 1) & self._mask

    def or_bits(self, key: int, bits: int) -> None:
        """Symbolic insert-or-OR keyed on a column-set index."""
        keys = self.slab.keys
        idx = ((key * _HASH_MULTIPLIER) & _MASK64) & self._mask
        while True:
            k = keys[idx]
            if k == key:
                self.slab.payload[idx] |= bits
                return
            if k == _EMPTY:
                keys[idx] = key
                self.slab.payload[idx] = bits
                self.slab.used[self._n_used] = idx
                self._n_used += 1
                return
            idx = (idx + 1) & self._mask

    def items(self):
        """(key, payload) pairs in insertion order."""
        slab = self.slab
        for t in range(self._n_used):
            idx = slab.used[t]
            yield slab.keys[idx], slab.payload[idx]

    def popcount_sum(self) -> int:
        slab = self.slab
        total = 0
        for t in range(self._n_used):
            total += slab.payload[slab.used[t]].bit_count()
        return total

    def reset(self) -> None:
        """Clear only the occupied slots; the rest of the slab stays empty."""
        slab = self.slab
        for t in range(self._n_used):
            slab.keys[slab.used[t]] = _EMPTY
        self._n_used = 0

    def live_slot_count(self) -> int:
        """Full scan over the capacity region; used by debug checks only."""
        return sum(1 for i in range(self.capacity) if self.slab.keys[i] != _EMPTY)
