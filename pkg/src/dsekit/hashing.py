"""Deterministic integer hashing for seed derivation, noise, and file fingerprints.

Everything here is pure integer arithmetic, so results are identical across
runs, platforms, and process counts.
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _finalize(h: int) -> int:
    """SplitMix64 finalizer: avalanche a 64-bit value."""
    h &= _MASK64
    h = ((h ^ (h >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    h = ((h ^ (h >> 27)) * 0x94D049BB133111EB) & _MASK64
    return h ^ (h >> 31)


def mix64(*values: int) -> int:
    """Combine integers into one well-mixed 64-bit hash.

    Used to derive independent child seeds from a master seed plus
    distinguishing tags, and as the counter-based noise source for
    deterministic cost surfaces.
    """
    h = _GOLDEN
    for v in values:
        h = _finalize(h + (int(v) & _MASK64))
    return h


def unit_float(h: int) -> float:
    """Map a 64-bit hash to a float in [0, 1) using its top 53 bits."""
    return ((h & _MASK64) >> 11) * 2.0**-53


def hash_unit(*values: int) -> float:
    """Hash integers straight to a deterministic float in [0, 1)."""
    return unit_float(mix64(*values))


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash of a byte string."""
    h = 0xCBF29CE484222325
    for byte in data:
        h = ((h ^ byte) * 0x100000001B3) & _MASK64
    return h


def fnv1a64_hex(data: bytes) -> str:
    """64-bit FNV-1a rendered as 16 lowercase hex digits."""
    return f"{fnv1a64(data):016x}"
