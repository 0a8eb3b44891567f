"""Deterministic 64-bit RNG primitives shared by both training backends.

The compiled kernel and the pure-Python kernel consume the exact same
splitmix64 streams, so seed derivation lives here (plain Python) and the
kernels only advance pre-derived states. Heavyweight bulk randomness
(matrix init, list shuffles, eval splits) goes through numpy generators
seeded from the same `mix64` values.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_INV_2_53 = 1.0 / 9007199254740992.0  # 2^-53


def splitmix64(state: int) -> tuple[int, int]:
    """Advance a splitmix64 state once; returns (new_state, output)."""
    state = (state + _GAMMA) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return state, z ^ (z >> 31)


def mix64(*parts: int) -> int:
    """Fold integer tags into a single 64-bit stream seed."""
    s = 0x8C5FB1FD0F2B3C4D
    for p in parts:
        s, out = splitmix64((s ^ (p & MASK64)) & MASK64)
        s ^= out
    return s & MASK64


class Stream:
    """Sequential splitmix64 stream with 53-bit uniform doubles."""

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state, out = splitmix64(self.state)
        return out

    def next_double(self) -> float:
        return (self.next_u64() >> 11) * _INV_2_53

    def next_below(self, n: int) -> int:
        # modulo bias is negligible for n << 2^64 and irrelevant here
        return self.next_u64() % n
