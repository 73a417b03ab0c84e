#!/usr/bin/env python3
"""Convert published residual-return matrices into the engine's wide CSV.

The public residual datasets ship as a values matrix plus separate date and
asset-id listings.  This script stitches any such triplet into the canonical
input format: first column ISO-8601 date, one column per asset id, blank
cells for days an asset is out of the universe.

Examples:
    python scripts/convert_dlsa.py --values pca_residuals.npy \
        --dates dates.csv --assets permnos.csv --out data/pca.csv

    # values already a dates x assets CSV without headers
    python scripts/convert_dlsa.py --values raw.csv --dates dates.txt \
        --assets ids.txt --out data/ipca.csv

Adjust --dates-column / --assets-column if the listing files carry headers.
"""
from __future__ import annotations

import argparse
import sys
from datetime import date, datetime
from pathlib import Path

import numpy as np
import pandas as pd


def load_matrix(path: Path) -> np.ndarray:
    if path.suffix == ".npy":
        return np.load(path)
    if path.suffix == ".npz":
        archive = np.load(path)
        return archive[archive.files[0]]
    return pd.read_csv(path, header=None).to_numpy(dtype=np.float64)


def load_listing(path: Path, column: str | None) -> list[str]:
    if path.suffix in (".csv", ".txt"):
        frame = pd.read_csv(path, header=0 if column else None, dtype=str)
        series = frame[column] if column else frame.iloc[:, 0]
        return [str(v).strip() for v in series.tolist()]
    if path.suffix == ".npy":
        return [str(v) for v in np.load(path, allow_pickle=True).tolist()]
    raise SystemExit(f"unsupported listing format: {path}")


def normalize_date(token: str) -> str:
    token = token.strip()
    for fmt in ("%Y-%m-%d", "%Y%m%d", "%m/%d/%Y"):
        try:
            return datetime.strptime(token, fmt).date().isoformat()
        except ValueError:
            continue
    try:  # days since epoch or pandas timestamps
        return str(np.datetime64(token, "D"))
    except ValueError:
        raise SystemExit(f"unrecognized date token: {token!r}") from None


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--values", required=True, type=Path,
                        help="dates x assets matrix (.npy/.npz/.csv)")
    parser.add_argument("--dates", required=True, type=Path,
                        help="one date per row, aligned with matrix rows")
    parser.add_argument("--assets", required=True, type=Path,
                        help="one asset id per row, aligned with matrix columns")
    parser.add_argument("--dates-column", default=None)
    parser.add_argument("--assets-column", default=None)
    parser.add_argument("--transpose", action="store_true",
                        help="matrix is assets x dates")
    parser.add_argument("--out", required=True, type=Path)
    args = parser.parse_args()

    values = load_matrix(args.values)
    if args.transpose:
        values = values.T
    dates = [normalize_date(t) for t in load_listing(args.dates, args.dates_column)]
    assets = load_listing(args.assets, args.assets_column)

    if values.shape != (len(dates), len(assets)):
        raise SystemExit(
            f"shape mismatch: matrix {values.shape}, "
            f"{len(dates)} dates x {len(assets)} assets (try --transpose)"
        )

    frame = pd.DataFrame(values, columns=assets)
    frame.insert(0, "date", dates)
    frame.sort_values("date", inplace=True)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(args.out, index=False, na_rep="")
    kept = int(np.isfinite(values).sum())
    print(f"wrote {args.out}: {len(dates)} dates x {len(assets)} assets, "
          f"{kept} non-missing returns")
    return 0


if __name__ == "__main__":
    sys.exit(main())
