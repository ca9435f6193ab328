"""Portable deterministic pseudo-random generator.

The generator is xoshiro256** seeded through splitmix64, with draw
rules fixed here so that identical seeds give identical streams on any
platform or implementation:

* ``next_u64`` follows the published xoshiro256** update.
* Floats in [0, 1) take the top 53 bits: ``(u64 >> 11) * 2**-53``.
* Bounded integers use rejection sampling against the largest multiple
  of the bound, then a modulo (no bias).
* Weighted choice draws one float and walks the cumulative weights.
* Sub-streams are derived by folding tag integers through splitmix64,
  so independent components can share one master seed.
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1

# Sub-stream tags for deriving independent streams from one master seed.
STREAM_REQUESTS = 1
STREAM_FLEET = 2
STREAM_EXPLORE = 3
STREAM_BATCH = 4
STREAM_NET_INIT = 5
STREAM_EVAL_REQUESTS = 6
STREAM_EVAL_FLEET = 7
STREAM_EVAL_ROLLOUT = 8


def _splitmix64(state: int) -> tuple[int, int]:
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, z ^ (z >> 31)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


def derive_seed(master: int, *tags: int) -> int:
    """Fold tag integers into a master seed to name a sub-stream."""
    state = master & _MASK64
    for tag in tags:
        state, out = _splitmix64(state ^ (tag & _MASK64))
        state = out
    _, out = _splitmix64(state)
    return out


class Rng:
    """xoshiro256** stream; one instance per owner, never shared."""

    __slots__ = ("_s",)

    def __init__(self, seed: int):
        state = seed & _MASK64
        s = []
        for _ in range(4):
            state, out = _splitmix64(state)
            s.append(out)
        self._s = s

    def next_u64(self) -> int:
        s = self._s
        result = (_rotl((s[1] * 5) & _MASK64, 7) * 9) & _MASK64
        t = (s[1] << 17) & _MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def random(self) -> float:
        return (self.next_u64() >> 11) * (2.0 ** -53)

    def randrange(self, n: int) -> int:
        """Uniform integer in [0, n)."""
        if n <= 0:
            raise ValueError("randrange bound must be positive")
        limit = _MASK64 + 1 - ((_MASK64 + 1) % n)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi], both ends inclusive."""
        if hi < lo:
            raise ValueError("empty range")
        return lo + self.randrange(hi - lo + 1)

    def choice_weighted(self, weights) -> int:
        """Index i with probability weights[i] / sum(weights)."""
        total = 0.0
        for w in weights:
            if w < 0:
                raise ValueError("negative weight")
            total += w
        if total <= 0:
            raise ValueError("weights sum to zero")
        r = self.random() * total
        acc = 0.0
        last = 0
        for i, w in enumerate(weights):
            if w <= 0:
                continue
            acc += w
            if r < acc:
                return i
            last = i
        return last

    def shuffle(self, items: list) -> None:
        """Fisher-Yates, in place."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randrange(i + 1)
            items[i], items[j] = items[j], items[i]

    def sample_indices(self, n: int, k: int) -> list[int]:
        """k distinct indices out of range(n), order randomized."""
        if k > n:
            raise ValueError("sample larger than population")
        pool = list(range(n))
        self.shuffle(pool)
        return pool[:k]

    def spawn(self, *tags: int) -> "Rng":
        """Child stream keyed by tags; does not advance this stream."""
        return Rng(derive_seed(self._s[0] ^ self._s[2], *tags))
