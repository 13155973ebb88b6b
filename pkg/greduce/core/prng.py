"""
SplitMix64 pseudo-random number generator

Traces are only portable if every implementation draws the same numbers, so
the engine fixes the algorithm instead of relying on the host's `random`:

    state += 0x9E3779B97F4A7C15
    z = state
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    return z ^ (z >> 31)

all arithmetic modulo 2**64. Bounded draws use the multiply-shift reduction
`(next() * n) >> 64`.
"""

MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
MIX_1 = 0xBF58476D1CE4E5B9
MIX_2 = 0x94D049BB133111EB


class SplitMix64:
    """Seeded 64-bit generator"""

    __slots__ = ("_state",)

    def __init__(self, seed: int):
        if not 0 <= seed <= MASK64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
        self._state = seed

    @property
    def state(self) -> int:
        return self._state

    def next_u64(self) -> int:
        self._state = z = (self._state + GOLDEN_GAMMA) & MASK64
        z = ((z ^ (z >> 30)) * MIX_1) & MASK64
        z = ((z ^ (z >> 27)) * MIX_2) & MASK64
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        """Draw uniformly from [0, n)"""
        return (self.next_u64() * n) >> 64

    def fork(self) -> "SplitMix64":
        """Independent stream seeded from this one"""
        return SplitMix64(self.next_u64())
