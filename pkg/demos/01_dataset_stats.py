#!/usr/bin/env python3
"""Dataset anatomy: load a residual panel, inspect universe churn and moments.

Builds a synthetic panel (there is no licensed market data in this repo),
saves it in the canonical wide-CSV format, reloads it, and prints the summary
statistics the `stats` subcommand reports.  Swap the synthetic file for a
converted public dataset to reproduce the published dataset statistics.
"""
import json
from pathlib import Path

import numpy as np

from resid_arb import DatasetMeta, eligible_assets, load_panel, save_panel, summary_stats
from resid_arb.synthetic import make_panel

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

print("== building a synthetic residual panel ==")
panel = make_panel(n_dates=500, n_assets=120, rho=-0.1, missing=0.005,
                   staggered=True, seed=42)
csv_path = OUT / "synthetic_pca.csv"
save_panel(panel, csv_path)
print(f"saved {csv_path} ({panel.n_dates} dates x {panel.n_assets} assets)")

print("\n== reloading and validating ==")
panel = load_panel(csv_path, DatasetMeta(factor_model="PCA", source_path=str(csv_path)))
per_day = panel.present.sum(axis=1)
print(f"universe size: min {per_day.min()}, median {int(np.median(per_day))}, "
      f"max {per_day.max()}")

print("\n== summary statistics (the `stats` subcommand computes the same) ==")
stats = summary_stats(panel)
print(json.dumps({"factor_model": "PCA", **stats.as_dict()}, indent=2))

print("\n== eligibility: who has an unbroken 100-day history? ==")
date = panel.dates[250]
ids = eligible_assets(panel, date, window=100)
print(f"{date}: {len(ids)} of {panel.n_assets} assets eligible")
print("first five:", ids[:5])
