"""Deterministic seed derivation and a minimal counter-style RNG.

Trees consume randomness from streams keyed by structural coordinates
(layer, forest, tree, node) instead of one shared mutable generator, so
results are reproducible under any parallel schedule.  The splitmix64
mixer used here is intentionally simple enough to implement identically
in the compiled backend; the two implementations must produce the same
draws bit for bit.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def mix64(x: int) -> int:
    """splitmix64 finalizer: a cheap 64-bit bijective mixer."""
    x &= MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def derive_seed(seed: int, *parts: int) -> int:
    """Fold integer coordinates into a 64-bit stream seed.

    Each step is bijective in the incoming part, so sibling streams
    (e.g. trees of one forest) never collide by construction.
    """
    s = seed & MASK64
    for p in parts:
        s = mix64((s + _GOLDEN + (p & MASK64)) & MASK64)
    return s


class SplitMix:
    """Sequential splitmix64 stream over a derived seed."""

    __slots__ = ("state",)

    def __init__(self, seed: int) -> None:
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + _GOLDEN) & MASK64
        return mix64(self.state)

    def next_uniform(self) -> float:
        # 53-bit mantissa draw shifted off zero: value lies strictly in (0, 1).
        return (float(self.next_u64() >> 11) + 0.5) * (1.0 / 9007199254740992.0)

    def next_below(self, n: int) -> int:
        return self.next_u64() % n
