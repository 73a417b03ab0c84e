"""Forecast construction: EMA input transform, de-adjustment, short-term reversal.

The EMA here is the recursive accumulator level' = coeff * level + r (limit
c / (1 - coeff) on a constant series), used both as the model input transform
(coefficient alpha) and as the short-term-reversal signal (coefficient beta).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .errors import ContractError


@dataclass
class ForecastVector:
    """Per-day map of asset id -> predicted next-day residual return."""

    date: np.datetime64
    scores: dict[str, float]
    source: str = ""

    def __post_init__(self):
        for asset, value in self.scores.items():
            if not math.isfinite(value):
                raise ContractError(f"non-finite forecast for asset {asset!r}")


class EmaState:
    """Per-asset recursive EMA levels.

    An asset becomes initialized on its first observed return (level := r,
    avoiding a zero-bias burn-in); afterwards level' = alpha * level + r.
    Assets never seen stay uninitialized; `reset` drops assets whose universe
    membership gapped, since eligibility requires an unbroken history anyway.
    """

    __slots__ = ("alpha", "levels")

    def __init__(self, alpha: float):
        if not (0.0 <= alpha < 1.0) or not math.isfinite(alpha):
            raise ContractError(f"EMA coefficient must be in [0, 1), got {alpha}")
        self.alpha = alpha
        self.levels: dict[str, float] = {}

    def update(self, date_returns: Mapping[str, float]) -> "EmaState":
        """Fold one day of returns into the per-asset levels."""
        alpha = self.alpha
        levels = self.levels
        for asset, r in date_returns.items():
            if not math.isfinite(r):
                raise ContractError(f"non-finite return for asset {asset!r}")
            prev = levels.get(asset)
            levels[asset] = r if prev is None else alpha * prev + r
        return self

    def reset(self, assets: Iterable[str]) -> None:
        """Drop state for assets that left the universe (gap => fresh seed later)."""
        for asset in assets:
            self.levels.pop(asset, None)

    def level(self, asset: str) -> float:
        try:
            return self.levels[asset]
        except KeyError:
            raise ContractError(f"asset {asset!r} has no EMA state") from None

    def initialized(self, asset: str) -> bool:
        return asset in self.levels

    @property
    def assets(self) -> set[str]:
        return set(self.levels)


def ema_update(state: EmaState, date_returns: Mapping[str, float]) -> EmaState:
    """One recursion step over a day's returns; see EmaState.update."""
    return state.update(date_returns)


def ema_transform_window(window: np.ndarray, alpha: float, seed_level: float | None = None) -> np.ndarray:
    """EMA-transform a raw return window into the accumulator series.

    `seed_level` is the level just before the window starts (None for a fresh
    series), so slices of a long recursion stay exact.
    """
    out = np.empty_like(window, dtype=np.float64)
    level = seed_level
    for i, r in enumerate(window):
        level = r if level is None else alpha * level + r
        out[i] = level
    return out


def deadjust_forecast(raw: ForecastVector, ema: EmaState) -> ForecastVector:
    """Remove the EMA carry from EMA-space forecasts: score - alpha * level.

    With alpha = 0 this is the identity.  Every forecast asset must have an
    initialized level in `ema`.
    """
    alpha = ema.alpha
    scores = {}
    for asset, chi in raw.scores.items():
        scores[asset] = chi - alpha * ema.level(asset)
    return ForecastVector(date=raw.date, scores=scores, source=raw.source)


def str_forecast(ema: EmaState, date, assets: Iterable[str] | None = None) -> ForecastVector:
    """Short-term-reversal scores: the negated EMA level per asset.

    Recent losers (negative accumulated return) get high scores and end up
    long.  Uninitialized assets are silently excluded.
    """
    if assets is None:
        assets = sorted(ema.levels)
    scores = {a: -ema.levels[a] for a in assets if a in ema.levels}
    return ForecastVector(date=np.datetime64(date, "D"), scores=scores, source="str")
