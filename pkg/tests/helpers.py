"""Shared builders for the test suite."""
from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

from resid_arb.panel import ResidualPanel
from resid_arb.synthetic import trading_days

DOUBLES_DIR = Path(__file__).parent / "doubles"


def bridge_cmd(mode: str, *extra: str) -> list[str]:
    return [sys.executable, str(DOUBLES_DIR / "scripted_bridge.py"), mode, *extra]


def panel_from_values(values, start: str = "2020-01-01", ids=None) -> ResidualPanel:
    """Panel from a 2-D array; NaN cells become universe exits."""
    values = np.asarray(values, dtype=np.float64)
    n, m = values.shape
    if ids is None:
        ids = [f"A{j:02d}" for j in range(m)]
    present = np.isfinite(values)
    return ResidualPanel(
        dates=trading_days(start, n),
        asset_ids=list(ids),
        values=values,
        present=present,
    )
