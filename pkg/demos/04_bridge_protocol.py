#!/usr/bin/env python3
"""Driving an external forecaster over the child-process JSON protocol.

Spawns the echo bridge (demos/echo_bridge.py), shows the handshake and one
forecast exchange frame by frame, then runs a short backtest where the
"model" lives in the subprocess.  A real server (e.g. the chronos bridge
package in bridge/) speaks exactly the same frames.
"""
import sys
from pathlib import Path

import numpy as np

from resid_arb import (
    BacktestConfig,
    BridgeClient,
    ContextWindow,
    bridge_forecast,
    run_backtest,
)
from resid_arb.synthetic import make_panel

HERE = Path(__file__).parent
CMD = [sys.executable, str(HERE / "echo_bridge.py")]

print("== handshake ==")
client = BridgeClient(CMD, timeout=30.0)
info = client.start()
print("server info:", info)

print("\n== one forecast exchange ==")
date = np.datetime64("2020-06-01")
windows = [
    ContextWindow(asset_id="AAA", end_date=date,
                  returns=np.array([0.002, -0.004, 0.001])),
    ContextWindow(asset_id="BBB", end_date=date,
                  returns=np.array([-0.001, 0.003, -0.002])),
]
fv = bridge_forecast(client, date, windows, num_samples=8, seed=42)
print("forecasts:", fv.scores)

print("\n== finetune request (the echo server just acknowledges) ==")
print("ack:", client.finetune(date, windows, tau=5))
client.shutdown()

print("\n== backtest with the subprocess as forecaster ==")
panel = make_panel(n_dates=200, n_assets=30, rho=-0.1, seed=3)
config = BacktestConfig(forecaster="bridge", bridge_cmd=CMD, alpha=0.3,
                        context_length=100, num_samples=8, seed=42)
result = run_backtest(panel, config)
print(f"bridge(echo) alpha=0.3: gross sharpe {result.sharpe_gross:.2f} "
      f"over {result.n_days} days")
print(
    "\nWith alpha > 0 the engine ships EMA-transformed windows and removes\n"
    "the EMA carry from whatever the server returns, so the echo server\n"
    "turns into a (1 - alpha) * EMA momentum signal here."
)
