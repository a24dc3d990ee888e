"""Pointwise tensor values with index-variance metadata."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class TensorValue:
    """Dense numeric multi-index array at a base point.

    `variance` has one character per slot: 'u' (contravariant) or 'd'
    (covariant); the empty string is a scalar.  The array has shape
    (dim,) * rank."""

    variance: str
    dim: int
    array: np.ndarray
    point: tuple = field(default_factory=tuple)

    def __post_init__(self):
        self.array = np.asarray(self.array, dtype=float)
        expected = (self.dim,) * self.rank
        if self.array.shape != expected:
            raise ValueError(f"array shape {self.array.shape} != {expected}")

    @property
    def rank(self) -> int:
        return len(self.variance)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.array))) if self.array.size else 0.0

    def symmetry_defect(self, slot_a: int = 0, slot_b: int = 1) -> float:
        """Max |T - T^swap| over the two given slots."""
        swapped = np.swapaxes(self.array, slot_a, slot_b)
        return float(np.max(np.abs(self.array - swapped)))
