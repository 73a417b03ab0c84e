"""Mean-scale uniform-bin tokenization of real-valued series.

Each series is scaled by the mean absolute value of its context, then
quantized into uniformly spaced bins on [low, high].  Token ids 0 and 1 are
reserved (pad, eos); value tokens start at 2.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class MeanScaleUniformBins:
    low: float = -15.0
    high: float = 15.0
    n_tokens: int = 4096
    n_special: int = 2
    pad_id: int = 0
    eos_id: int = 1

    centers: np.ndarray = field(init=False, repr=False)
    boundaries: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n_bins = self.n_tokens - self.n_special
        self.centers = np.linspace(self.low, self.high, n_bins)
        self.boundaries = (self.centers[1:] + self.centers[:-1]) / 2.0

    def scale_of(self, context: np.ndarray) -> float:
        """Mean absolute value of the context; 1.0 when degenerate."""
        context = np.asarray(context, dtype=np.float64)
        scale = float(np.mean(np.abs(context))) if context.size else 0.0
        if not np.isfinite(scale) or scale <= 0.0:
            return 1.0
        return scale

    def encode_values(self, values: np.ndarray, scale: float) -> np.ndarray:
        """Quantize values/scale into token ids (specials excluded)."""
        normalized = np.asarray(values, dtype=np.float64) / scale
        return self.n_special + np.searchsorted(self.boundaries, normalized)

    def decode_token(self, token_id: int, scale: float) -> float:
        """Bin center times scale; special tokens decode to a neutral 0.0."""
        if token_id < self.n_special or token_id >= self.n_tokens:
            return 0.0
        return float(self.centers[token_id - self.n_special] * scale)
