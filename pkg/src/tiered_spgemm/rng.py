"""Portable seeded random number generator.

SplitMix64 is used everywhere randomness is needed so that generated
matrices are bit-reproducible from a seed, independent of interpreter or
platform.  The recurrence, for a 64-bit state s:

    s     = (s + 0x9E3779B97F4A7C15) mod 2^64
    z     = s
    z     = (z XOR (z >> 30)) * 0xBF58476D1CE4E5B9 mod 2^64
    z     = (z XOR (z >> 27)) * 0x94D049BB133111EB mod 2^64
    out   = z XOR (z >> 31)
"""

_MASK64 = (1 << 64) - 1


class PortableRng:
    """SplitMix64 stream seeded with a user integer."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        """Uniform integer in [0, n), unbiased via rejection sampling."""
        if n <= 0:
            raise ValueError("bound must be positive")
        limit = _MASK64 + 1 - ((_MASK64 + 1) % n)
        while True:
            v = self.next_u64()
            if v < limit:
                return v % n

    def uniform_open_closed(self) -> float:
        """Uniform float in (0, 1], 53 bits of precision."""
        return ((self.next_u64() >> 11) + 1) * (2.0 ** -53)

    def sample_without_replacement(self, n: int, k: int) -> list:
        """k distinct integers from [0, n), in draw order.

        Partial Fisher-Yates over a sparse view of the identity permutation,
        O(k) time and space regardless of n.
        """
        if k > n:
            raise ValueError("cannot draw %d distinct values from %d" % (k, n))
        swapped = {}
        out = []
        for j in range(k):
            r = j + self.below(n - j)
            out.append(swapped.get(r, r))
            swapped[r] = swapped.get(j, j)
        return out
