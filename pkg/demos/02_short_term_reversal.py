#!/usr/bin/env python3
"""The reversal pipeline end to end: EMA scores -> rank weights -> PnL.

Runs the short-term-reversal forecaster on a synthetic panel with genuine
negative autocorrelation, with and without volatility resizing, applies the
3 bps cost model, and writes equity curves + metrics like the `run`
subcommand would.
"""
from pathlib import Path

from resid_arb import BacktestConfig, export_result, run_backtest
from resid_arb.synthetic import make_panel

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

panel = make_panel(n_dates=700, n_assets=150, rho=-0.08, missing=0.002,
                   staggered=True, seed=7)
print(f"panel: {panel.n_dates} dates x {panel.n_assets} assets")

for resize in (False, True):
    label = "resized" if resize else "plain"
    config = BacktestConfig(forecaster="str", beta=0.3, resize=resize,
                            cost_bps=3.0)
    result = run_backtest(panel, config)
    paths = export_result(result, OUT / f"str_{label}")
    print(
        f"STR beta=0.3 {label:7s}: gross sharpe {result.sharpe_gross:6.2f}  "
        f"net {result.sharpe_net:6.2f}  avg turnover {result.avg_turnover:.2f}  "
        f"({result.n_days} days) -> {paths['plot']}"
    )

print(
    "\nNote how costs eat a short-horizon strategy: the daily book turns over\n"
    "most of its gross exposure, so 3 bps per unit of turnover is a large\n"
    "drag relative to daily residual spreads."
)
