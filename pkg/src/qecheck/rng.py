"""Deterministic point sampling.

The sampler is a xorshift64* generator, fixed bit-for-bit so that reports are
reproducible across runs and across language ports.  The exact recipe (also in
schema/prng.md):

  state: uint64, initialised to the seed; a zero seed is replaced by
         0x9E3779B97F4A7C15 (xorshift state must be nonzero).
  step:  s ^= s >> 12;  s ^= (s << 25) & mask64;  s ^= s >> 27;
         output = (s * 0x2545F4914F6CDD1D) & mask64
  float: output >> 11, times 2^-53  ->  uniform in [0, 1)

Points are drawn row-major: point 0 coordinate 0, point 0 coordinate 1, ...,
then point 1, each mapped affinely onto the chart box.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
DEFAULT_SEED = 0x5EEDCA5E
_ZERO_SEED_REPLACEMENT = 0x9E3779B97F4A7C15
_MULT = 0x2545F4914F6CDD1D


class XorShift64Star:
    def __init__(self, seed: int):
        self.state = (seed & MASK64) or _ZERO_SEED_REPLACEMENT

    def next_u64(self) -> int:
        s = self.state
        s ^= s >> 12
        s ^= (s << 25) & MASK64
        s ^= s >> 27
        self.state = s
        return (s * _MULT) & MASK64

    def next_float(self) -> float:
        return (self.next_u64() >> 11) * 2.0 ** -53


def sample_box(box, count: int, seed: int = DEFAULT_SEED) -> np.ndarray:
    """Uniform sample of `count` points from the product of closed intervals
    `box` (sequence of (lo, hi)).  Returns array of shape (count, len(box))."""
    gen = XorShift64Star(seed)
    n = len(box)
    pts = np.empty((count, n), dtype=float)
    for k in range(count):
        for i, (lo, hi) in enumerate(box):
            pts[k, i] = lo + gen.next_float() * (hi - lo)
    return pts
