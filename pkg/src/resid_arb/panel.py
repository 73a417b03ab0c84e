"""Residual-return panels: loading, validation, windowing, summary statistics.

A panel is the dates x assets matrix of daily residual returns produced by a
factor-model pipeline (IPCA / PCA / Fama-French, K = 5 factors).  Missing
cells encode universe membership: an asset without a residual return on a day
is simply not in the universe that day.  Values are never forward-filled.

Input format is a wide CSV: first column ISO-8601 date, one column per asset
id, empty cells (or "NaN") meaning "not in the universe".
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import date as _date
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import (
    ContractError,
    InsufficientDataError,
    InsufficientHistoryError,
    PanelParseError,
    PanelValidationError,
)

_MISSING_TOKENS = ("", "NaN", "nan", "NAN")

FACTOR_MODELS = ("IPCA", "PCA", "FF")


@dataclass(frozen=True)
class DatasetMeta:
    """Identity of a residual-returns dataset."""

    factor_model: str
    num_factors: int = 5
    source_path: str = ""

    def __post_init__(self):
        if self.factor_model not in FACTOR_MODELS:
            raise ContractError(
                f"factor_model must be one of {FACTOR_MODELS}, got {self.factor_model!r}"
            )
        if self.num_factors < 1:
            raise ContractError("num_factors must be positive")


@dataclass(frozen=True)
class PanelStats:
    """Moments of all non-missing residual returns in a panel."""

    mean: float
    sd: float
    skewness: float
    kurtosis: float  # raw (non-excess) Pearson kurtosis, m4 / m2^2
    count: int

    def as_dict(self) -> dict:
        return {
            "mean": self.mean,
            "sd": self.sd,
            "skewness": self.skewness,
            "kurtosis": self.kurtosis,
            "count": self.count,
        }


@dataclass(frozen=True)
class ContextWindow:
    """The trailing window of returns handed to a forecaster for one asset."""

    asset_id: str
    end_date: np.datetime64
    returns: np.ndarray  # length L, oldest first, all finite

    def __post_init__(self):
        if not np.all(np.isfinite(self.returns)):
            raise ContractError(f"context window for {self.asset_id} has non-finite values")


@dataclass
class ResidualPanel:
    """Immutable dates x assets matrix of daily residual returns."""

    dates: np.ndarray  # datetime64[D], strictly increasing
    asset_ids: list[str]
    values: np.ndarray  # float64 [date, asset]; NaN where absent
    present: np.ndarray  # bool [date, asset]
    meta: DatasetMeta | None = None

    _date_index: dict = field(default_factory=dict, repr=False)
    _runs: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.dates = np.asarray(self.dates, dtype="datetime64[D]")
        self.values = np.asarray(self.values, dtype=np.float64)
        self.present = np.asarray(self.present, dtype=bool)
        n_dates, n_assets = self.values.shape
        if self.dates.shape != (n_dates,) or self.present.shape != (n_dates, n_assets):
            raise PanelValidationError("dates/values/present shapes do not line up")
        if len(self.asset_ids) != n_assets:
            raise PanelValidationError("asset_ids length does not match values")
        if len(set(self.asset_ids)) != n_assets:
            raise PanelValidationError("asset ids are not unique")
        if n_dates > 1 and not np.all(self.dates[1:] > self.dates[:-1]):
            raise PanelValidationError("dates must be strictly increasing")
        if not np.all(np.isfinite(self.values[self.present])):
            raise PanelValidationError("non-finite value inside the universe mask")
        self._date_index = {d: i for i, d in enumerate(self.dates)}

    @property
    def n_dates(self) -> int:
        return len(self.dates)

    @property
    def n_assets(self) -> int:
        return len(self.asset_ids)

    def index_of(self, date) -> int:
        """Row index of a trading date; raises if the date is not in the panel."""
        key = np.datetime64(date, "D")
        try:
            return self._date_index[key]
        except KeyError:
            raise ContractError(f"date {key} is not a trading day of this panel") from None

    def presence_runs(self) -> np.ndarray:
        """Length of the unbroken presence run ending at each (date, asset)."""
        if self._runs is None:
            runs = np.zeros(self.present.shape, dtype=np.int32)
            acc = np.zeros(self.n_assets, dtype=np.int32)
            for t in range(self.n_dates):
                acc = np.where(self.present[t], acc + 1, 0)
                runs[t] = acc
            self._runs = runs
        return self._runs


def load_panel(path, meta: DatasetMeta | None = None) -> ResidualPanel:
    """Load a wide-CSV residual panel, deriving the universe mask from blanks.

    Rows may arrive out of order; they are sorted by date with values permuted
    consistently.  Malformed dates and non-numeric cells are reported with
    their CSV line (and column) numbers.
    """
    path = Path(path)
    if not path.exists():
        raise PanelParseError(f"dataset file not found: {path}")

    try:
        header = pd.read_csv(path, nrows=0)
    except pd.errors.ParserError as exc:
        raise PanelParseError(f"{path}: {exc}") from exc
    columns = list(header.columns)
    if len(columns) < 2:
        raise PanelParseError(f"{path}: need a date column plus at least one asset column")
    asset_ids = [str(c) for c in columns[1:]]
    if len(set(asset_ids)) != len(asset_ids):
        raise PanelValidationError(f"{path}: duplicate asset columns")

    try:
        frame = pd.read_csv(
            path,
            dtype={columns[0]: str, **{c: np.float64 for c in columns[1:]}},
            na_values=list(_MISSING_TOKENS),
            keep_default_na=False,
            float_precision="round_trip",
        )
    except (ValueError, TypeError):
        _locate_bad_cell(path, columns)  # raises with (line, column) when found
        raise
    except pd.errors.ParserError as exc:
        raise PanelParseError(f"{path}: {exc}") from exc

    raw_dates = frame[columns[0]].tolist()
    dates = np.empty(len(raw_dates), dtype="datetime64[D]")
    for i, token in enumerate(raw_dates):
        try:
            dates[i] = _date.fromisoformat(str(token).strip())
        except ValueError:
            raise PanelParseError(
                f"{path}: malformed date {token!r} at line {i + 2}"
            ) from None

    values = frame[columns[1:]].to_numpy(dtype=np.float64, copy=True)

    order = np.argsort(dates, kind="stable")
    dates = dates[order]
    values = values[order]
    dupes = np.flatnonzero(dates[1:] == dates[:-1])
    if dupes.size:
        raise PanelValidationError(f"{path}: duplicate date {dates[dupes[0]]}")

    present = np.isfinite(values)
    return ResidualPanel(dates=dates, asset_ids=asset_ids, values=values,
                         present=present, meta=meta)


def _locate_bad_cell(path: Path, columns: list[str]) -> None:
    """Slow pass that pins a non-numeric cell to its (line, column)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader, None)  # header
        for line_no, row in enumerate(reader, start=2):
            for col_no, token in enumerate(row[1:], start=1):
                token = token.strip()
                if token in _MISSING_TOKENS:
                    continue
                try:
                    float(token)
                except ValueError:
                    name = columns[col_no] if col_no < len(columns) else f"#{col_no}"
                    raise PanelParseError(
                        f"{path}: non-numeric value {token!r} at line {line_no}, "
                        f"column {name!r}"
                    ) from None


def save_panel(panel: ResidualPanel, path) -> None:
    """Write a panel back to the wide-CSV format (missing cells left empty)."""
    frame = pd.DataFrame(panel.values, columns=panel.asset_ids)
    frame.insert(0, "date", [str(d) for d in panel.dates])
    frame.to_csv(path, index=False, na_rep="")


def summary_stats(panel: ResidualPanel) -> PanelStats:
    """Moments over all non-missing cells.

    sd is the sample standard deviation (n-1 denominator); skewness is the
    moment estimator m3 / m2^1.5; kurtosis is raw Pearson m4 / m2^2 (not
    excess), which is the convention that puts daily residual returns in the
    several-hundred range.
    """
    x = panel.values[panel.present]
    n = x.size
    if n < 2:
        raise InsufficientDataError(f"need at least 2 observations, have {n}")
    mean = float(x.mean())
    centered = x - mean
    sq = centered * centered
    m2 = float(np.mean(sq))
    m3 = float(np.mean(sq * centered))   # products, not **: keeps sign symmetry
    m4 = float(np.mean(sq * sq))
    sd = math.sqrt(m2 * n / (n - 1))
    if m2 == 0.0:
        skew = 0.0
        kurt = 0.0
    else:
        skew = m3 / m2**1.5
        kurt = m4 / m2**2
    return PanelStats(mean=mean, sd=sd, skewness=skew, kurtosis=kurt, count=n)


def eligible_assets(panel: ResidualPanel, date, window: int = 100) -> list[str]:
    """Asset ids present on all `window` consecutive trading days ending at `date`.

    Returned sorted by asset id for determinism.
    """
    idx = panel.index_of(date)
    if idx < window:
        raise InsufficientHistoryError(
            f"date {np.datetime64(date, 'D')} has only {idx} prior trading days, "
            f"need {window}"
        )
    runs = panel.presence_runs()[idx]
    ids = [panel.asset_ids[j] for j in np.flatnonzero(runs >= window)]
    ids.sort()
    return ids


def context_windows(panel: ResidualPanel, date, window: int = 100) -> list[ContextWindow]:
    """One oldest-first ContextWindow per eligible asset (sorted by asset id)."""
    idx = panel.index_of(date)
    ids = eligible_assets(panel, date, window)
    col = {a: j for j, a in enumerate(panel.asset_ids)}
    end_date = panel.dates[idx]
    out = []
    for a in ids:
        series = panel.values[idx - window + 1 : idx + 1, col[a]].copy()
        out.append(ContextWindow(asset_id=a, end_date=end_date, returns=series))
    return out
