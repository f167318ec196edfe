"""Deterministic seed derivation.

Every stochastic component in the pipeline draws its seed through
``derive_seed`` so that a single pipeline seed reproduces the whole run,
and retries / parallel jobs get independent streams.
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One splitmix64 step; a cheap, well-mixed 64-bit hash."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def derive_seed(*parts) -> int:
    """Mix integers and strings into one 64-bit seed.

    Order-sensitive: derive_seed(a, b) != derive_seed(b, a) in general.
    """
    state = 0x5EED5EED5EED5EED
    for part in parts:
        if isinstance(part, str):
            for byte in part.encode("utf-8"):
                state = splitmix64(state ^ byte)
        else:
            state = splitmix64(state ^ (int(part) & _MASK64))
    return state
