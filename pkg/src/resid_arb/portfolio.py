"""Cross-sectional portfolio construction from forecast scores.

Weights come from a double argsort of the scores: each asset's weight is its
rank distance from the median, normalized to gross exposure 1.  Only ranks
enter, so any strictly increasing transform of the scores yields identical
weights.  An optional resizing step shrinks weights on volatile names by
median-vol / max(vol, median-vol) and restores exact dollar neutrality.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import ContractError, DegenerateUniverseError
from .panel import ResidualPanel, eligible_assets
from .signal import ForecastVector

CENTERING_MODES = ("median", "paper")


@dataclass
class PortfolioWeights:
    """Signed weights as fractions of a gross-1 book; dollar-neutral by default."""

    date: np.datetime64
    weights: dict[str, float]
    resized: bool = False

    @property
    def gross(self) -> float:
        return sum(abs(w) for w in self.weights.values())

    @property
    def net(self) -> float:
        return sum(self.weights.values())


@dataclass
class VolatilityVector:
    """Trailing standard deviation of daily residual returns per asset."""

    date: np.datetime64
    sigma: dict[str, float]


def centered_rank_weights(
    forecast: ForecastVector, centering: str = "median"
) -> dict[str, float]:
    """Raw (unnormalized) rank weights: rank minus the centering offset.

    Ranks are positions in ascending score order (argsort of argsort), ties
    broken deterministically by asset id.  "median" subtracts (N-1)/2 so the
    book nets to zero exactly; "paper" subtracts N/2, which leaves the half
    rank-unit net short of the uncentered formula for sensitivity checks.
    """
    if centering not in CENTERING_MODES:
        raise ContractError(f"centering must be one of {CENTERING_MODES}")
    n = len(forecast.scores)
    if n < 2:
        raise DegenerateUniverseError(f"need at least 2 assets, have {n}")
    assets = sorted(forecast.scores)
    scores = np.array([forecast.scores[a] for a in assets])
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(n, dtype=np.float64)
    ranks[order] = np.arange(n, dtype=np.float64)
    offset = (n - 1) / 2.0 if centering == "median" else n / 2.0
    centered = ranks - offset
    return dict(zip(assets, centered.tolist()))


def _normalized(date, raw: Mapping[str, float], resized: bool) -> PortfolioWeights:
    gross = sum(abs(w) for w in raw.values())
    if gross <= 0.0:
        raise DegenerateUniverseError("all raw weights are zero")
    weights = {a: w / gross for a, w in raw.items()}
    return PortfolioWeights(date=date, weights=weights, resized=resized)


def rank_weights(forecast: ForecastVector, centering: str = "median") -> PortfolioWeights:
    """Normalized rank weights: gross exposure 1, net 0 under median centering."""
    raw = centered_rank_weights(forecast, centering)
    return _normalized(forecast.date, raw, resized=False)


def trailing_volatility(panel: ResidualPanel, date, window: int = 100) -> VolatilityVector:
    """Sample std of the `window` returns ending at `date`, per eligible asset."""
    idx = panel.index_of(date)
    ids = eligible_assets(panel, date, window)
    col = {a: j for j, a in enumerate(panel.asset_ids)}
    block_idx = [col[a] for a in ids]
    block = panel.values[idx - window + 1 : idx + 1, block_idx]
    sig = block.std(axis=0, ddof=1)
    return VolatilityVector(date=panel.dates[idx], sigma=dict(zip(ids, sig.tolist())))


def vol_scaling_factors(vol: VolatilityVector, assets=None) -> dict[str, float]:
    """Shrink factors median(sigma) / max(sigma_i, median(sigma)), in (0, 1]."""
    if assets is None:
        assets = sorted(vol.sigma)
    else:
        assets = list(assets)
        missing = [a for a in assets if a not in vol.sigma]
        if missing:
            raise ContractError(f"volatility missing for assets {missing[:5]}")
    if not assets:
        raise ContractError("empty volatility vector")
    sig = np.array([vol.sigma[a] for a in assets], dtype=np.float64)
    if np.any(~np.isfinite(sig)) or np.any(sig < 0):
        raise ContractError("volatilities must be finite and non-negative")
    med = float(np.median(sig))
    denom = np.maximum(sig, med)
    factors = np.where(denom > 0.0, med / np.where(denom > 0.0, denom, 1.0), 1.0)
    return dict(zip(assets, factors.tolist()))


def resize_weights(raw: Mapping[str, float], vol: VolatilityVector, date=None) -> PortfolioWeights:
    """Shrink raw centered weights on volatile assets, then re-neutralize.

    The shrink alone breaks exact dollar neutrality, so the gross-weighted
    mean is subtracted (adjustment proportional to |w|, keeping zero weights
    at zero) before the gross-1 normalization.
    """
    if not raw:
        raise ContractError("no weights to resize")
    factors = vol_scaling_factors(vol, assets=raw.keys())
    assets = sorted(raw)
    w = np.array([raw[a] * factors[a] for a in assets], dtype=np.float64)
    gross = float(np.abs(w).sum())
    if gross <= 0.0:
        raise DegenerateUniverseError("resized weights are all zero")
    w = w - np.abs(w) * (w.sum() / gross)
    out_date = date if date is not None else vol.date
    return _normalized(out_date, dict(zip(assets, w.tolist())), resized=True)
