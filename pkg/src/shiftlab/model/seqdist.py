"""Per-position output distributions over the vocabulary."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SequenceDistribution:
    """probs: (B, L, V) rows summing to 1; mask: (B, L) True at scored positions."""

    probs: np.ndarray
    mask: np.ndarray

    def __post_init__(self) -> None:
        if self.probs.ndim != 3 or self.mask.shape != self.probs.shape[:2]:
            raise ValueError(
                f"shape mismatch: probs {self.probs.shape}, mask {self.mask.shape}"
            )
        sums = self.probs[self.mask].sum(axis=-1)
        if sums.size and np.abs(sums - 1.0).max() > 1e-6:
            raise ValueError("masked positions must sum to 1 within 1e-6")

    @property
    def n_scored(self) -> int:
        return int(self.mask.sum())
