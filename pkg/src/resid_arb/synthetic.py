"""Synthetic residual panels for tests and demos.

Daily residual returns are modeled as weakly negatively autocorrelated noise
(the short-term-reversal effect), with assets entering and leaving the
universe to exercise the missingness machinery.  Nothing here resembles the
published datasets beyond shape and rough scale.
"""
from __future__ import annotations

import numpy as np

from .panel import ResidualPanel


def trading_days(start: str, n: int) -> np.ndarray:
    """n weekday dates starting at `start` (weekends skipped)."""
    out = np.empty(n, dtype="datetime64[D]")
    d = np.datetime64(start, "D")
    k = 0
    while k < n:
        dow = (d.astype("datetime64[D]").astype(int) + 3) % 7  # 1970-01-01 = Thursday

        if dow < 5:
            out[k] = d
            k += 1
        d += 1
    return out


def make_panel(
    n_dates: int = 260,
    n_assets: int = 30,
    rho: float = -0.1,
    sd: float = 0.006,
    missing: float = 0.0,
    staggered: bool = False,
    start: str = "2001-01-01",
    seed: int = 0,
) -> ResidualPanel:
    """Random panel of AR(1) residual returns with optional universe churn.

    rho < 0 makes recent losers bounce back, so the reversal strategy has
    something to find.  `missing` knocks out random cells; `staggered` delays
    each asset's listing by a random offset.
    """
    rng = np.random.default_rng(seed)
    eps = rng.normal(0.0, sd, size=(n_dates, n_assets))
    values = np.empty((n_dates, n_assets))
    values[0] = eps[0]
    for t in range(1, n_dates):
        values[t] = rho * values[t - 1] + eps[t]

    present = np.ones((n_dates, n_assets), dtype=bool)
    if staggered:
        # delay listings for a third of the assets; the rest trade from day 0
        late = rng.choice(n_assets, size=n_assets // 3, replace=False)
        offsets = rng.integers(1, max(2, n_dates // 2), size=late.size)
        for j, off in zip(late, offsets):
            present[:off, j] = False
    if missing > 0.0:
        present &= rng.random((n_dates, n_assets)) >= missing

    values = np.where(present, values, np.nan)
    ids = [f"A{j:04d}" for j in range(n_assets)]
    return ResidualPanel(
        dates=trading_days(start, n_dates),
        asset_ids=ids,
        values=values,
        present=present,
    )
