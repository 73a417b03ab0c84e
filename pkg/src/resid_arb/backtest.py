"""Walk-forward daily backtest: forecast -> weights -> next-day PnL.

The day loop is strictly sequential (EMA and bridge state are
path-dependent); weights formed at day d use only data up to d, and the
position earns the day-d+1 residual returns.  Assets that leave the universe
overnight contribute zero.  Turnover is the L1 change of the weight book and
costs are charged at cost_bps basis points per unit of turnover.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .arima import auto_arima_forecast
from .bridge import BridgeClient, bridge_forecast
from .errors import (
    ContractError,
    ForecasterError,
    InsufficientHistoryError,
    ResidArbError,
    UndefinedSharpeError,
)
from .panel import ContextWindow, DatasetMeta, ResidualPanel
from .portfolio import (
    PortfolioWeights,
    centered_rank_weights,
    rank_weights,
    resize_weights,
    trailing_volatility,
)
from .signal import EmaState, ForecastVector, deadjust_forecast, str_forecast

logger = logging.getLogger(__name__)

FORECASTERS = ("str", "auto-arima", "bridge")


@dataclass
class BacktestConfig:
    """Everything an experiment needs; echoed verbatim into metrics.json."""

    forecaster: str = "str"
    beta: float = 0.3             # STR reversal EMA coefficient
    alpha: float = 0.0            # input-EMA coefficient for window forecasters
    num_samples: int = 20         # bridge sample paths averaged per forecast
    finetune_tau: int | None = None  # daily training step cap; None = zero-shot
    context_length: int = 100
    resize: bool = False
    centering: str = "median"     # "paper" reproduces the uncentered N/2 offset
    cost_bps: float = 3.0
    start_date: str | None = None
    end_date: str | None = None
    annualization_days: int = 252
    seed: int = 0
    decision_stride: int = 1      # 2 = every-2nd-day desk-scale subsample
    jobs: int = 1
    bridge_cmd: list[str] | None = None
    bridge_timeout: float = 600.0
    dataset: DatasetMeta | None = None

    def __post_init__(self):
        if self.forecaster not in FORECASTERS:
            raise ContractError(f"forecaster must be one of {FORECASTERS}")
        if not (0.0 <= self.beta < 1.0):
            raise ContractError(f"beta must be in [0, 1), got {self.beta}")
        if not (0.0 <= self.alpha < 1.0):
            raise ContractError(f"alpha must be in [0, 1), got {self.alpha}")
        if self.context_length < 2:
            raise ContractError("context_length must be at least 2")
        if self.cost_bps < 0:
            raise ContractError("cost_bps must be non-negative")
        if self.num_samples < 1:
            raise ContractError("num_samples must be positive")
        if self.finetune_tau is not None and self.finetune_tau < 0:
            raise ContractError("finetune_tau must be non-negative")
        if self.decision_stride < 1 or self.jobs < 1:
            raise ContractError("decision_stride and jobs must be positive")
        if self.annualization_days < 1:
            raise ContractError("annualization_days must be positive")
        if self.centering not in ("median", "paper"):
            raise ContractError(f"centering must be 'median' or 'paper', got {self.centering!r}")
        if self.start_date is not None and self.end_date is not None:
            if np.datetime64(self.start_date) >= np.datetime64(self.end_date):
                raise ContractError("start_date must precede end_date")

    def as_dict(self) -> dict:
        out = asdict(self)
        return out


@dataclass
class BacktestResult:
    """Daily gross/net returns plus summary metrics for one configuration."""

    dates: np.ndarray                 # decision dates (PnL realized next day)
    gross: np.ndarray
    net: np.ndarray
    turnover: np.ndarray
    equity_gross: np.ndarray
    equity_net: np.ndarray
    sharpe_gross: float | None
    sharpe_net: float | None
    t_stat: float | None              # gross sharpe x sqrt(years)
    ann_vol: float | None
    avg_turnover: float | None
    n_days: int
    config: BacktestConfig
    weights: list[PortfolioWeights] | None = None

    @property
    def daily(self) -> list[dict]:
        return [
            {
                "date": str(self.dates[i]),
                "gross_return": float(self.gross[i]),
                "net_return": float(self.net[i]),
                "turnover": float(self.turnover[i]),
            }
            for i in range(self.n_days)
        ]

    def metrics(self) -> dict:
        return {
            "sharpe_gross": self.sharpe_gross,
            "sharpe_net": self.sharpe_net,
            "t_stat_gross": self.t_stat,
            "ann_vol": self.ann_vol,
            "avg_turnover": self.avg_turnover,
            "n_days": self.n_days,
            "config": self.config.as_dict(),
        }


def sharpe(daily_returns, annualization_days: int = 252) -> float:
    """Annualized mean over annualized std: mean/std * sqrt(A), std with n-1."""
    arr = np.asarray(daily_returns, dtype=np.float64)
    if arr.size < 2:
        raise UndefinedSharpeError(f"need at least 2 returns, have {arr.size}")
    if np.all(arr == arr[0]):
        raise UndefinedSharpeError("zero-variance return series")
    sd = float(arr.std(ddof=1))
    if sd == 0.0 or not math.isfinite(sd):
        raise UndefinedSharpeError("zero-variance return series")
    return float(arr.mean() / sd * math.sqrt(annualization_days))


def t_statistic(sharpe_ratio: float, years: float) -> float:
    """Significance of an annualized Sharpe over a track record of `years`."""
    if years <= 0:
        raise ContractError(f"years must be positive, got {years}")
    return float(sharpe_ratio * math.sqrt(years))


def apply_costs(gross, turnover, cost_bps: float):
    """net_d = gross_d - cost_bps * 1e-4 * turnover_d, elementwise."""
    g = np.asarray(gross, dtype=np.float64)
    t = np.asarray(turnover, dtype=np.float64)
    if g.shape != t.shape:
        raise ContractError(f"gross {g.shape} and turnover {t.shape} lengths differ")
    return g - (cost_bps * 1e-4) * t


def _summarize(
    dates: list,
    gross: list,
    turnover: list,
    config: BacktestConfig,
    weights: list[PortfolioWeights] | None,
) -> BacktestResult:
    g = np.asarray(gross, dtype=np.float64)
    t = np.asarray(turnover, dtype=np.float64)
    net = apply_costs(g, t, config.cost_bps)
    n = g.size
    a = config.annualization_days

    def _safe_sharpe(series):
        try:
            return sharpe(series, a)
        except UndefinedSharpeError:
            return None

    sg = _safe_sharpe(g)
    sn = _safe_sharpe(net)
    years = n / a
    return BacktestResult(
        dates=np.asarray(dates, dtype="datetime64[D]"),
        gross=g,
        net=net,
        turnover=t,
        equity_gross=np.cumsum(g),
        equity_net=np.cumsum(net),
        sharpe_gross=sg,
        sharpe_net=sn,
        t_stat=None if sg is None else t_statistic(sg, years),
        ann_vol=float(g.std(ddof=1) * math.sqrt(a)) if n >= 2 else None,
        avg_turnover=float(t.mean()) if n else None,
        n_days=n,
        config=config,
        weights=weights,
    )


def _decision_indices(panel: ResidualPanel, config: BacktestConfig) -> list[int]:
    """Panel row indices of decision days: [start, end], realized day in range."""
    n = panel.n_dates
    L = config.context_length
    start = (
        np.datetime64(config.start_date, "D")
        if config.start_date
        else (panel.dates[L] if L < n else None)
    )
    if start is None:
        raise InsufficientHistoryError(
            f"panel has {n} dates, need more than context_length={L}"
        )
    end = np.datetime64(config.end_date, "D") if config.end_date else panel.dates[-1]
    t0 = int(np.searchsorted(panel.dates, start, side="left"))
    t_end = int(np.searchsorted(panel.dates, end, side="right")) - 1
    if t0 < L:
        raise InsufficientHistoryError(
            f"start {start} has only {t0} prior trading days, need {L}"
        )
    # the decision at t realizes PnL at t+1, which must stay inside the window
    return list(range(t0, t_end, config.decision_stride))


def run_backtest(
    panel: ResidualPanel,
    config: BacktestConfig,
    out_dir: str | Path | None = None,
    record_weights: bool = False,
) -> BacktestResult:
    """Run the walk-forward loop; see the module docstring for the contract.

    On a forecaster failure the partial results are flushed to `out_dir`
    (when given) together with a failure report, then the error re-raises.
    Runs are bit-for-bit reproducible for a fixed config and seed.
    """
    decisions = _decision_indices(panel, config)
    decision_set = set(decisions)
    L = config.context_length
    ids = panel.asset_ids
    col = {a: j for j, a in enumerate(ids)}
    runs = panel.presence_runs()
    values = panel.values
    present = panel.present

    needs_ema = config.forecaster == "str" or config.alpha > 0.0
    ema_coeff = config.beta if config.forecaster == "str" else config.alpha
    ema = EmaState(ema_coeff) if needs_ema else None
    # rolling per-day snapshots of EMA levels, for EMA-space context windows
    snaps: list[dict] | None = [] if (config.alpha > 0.0 and config.forecaster != "str") else None

    client: BridgeClient | None = None
    executor: ThreadPoolExecutor | None = None

    out_dates: list = []
    out_gross: list[float] = []
    out_turnover: list[float] = []
    out_weights: list[PortfolioWeights] | None = [] if record_weights else None
    prev_weights: dict[str, float] = {}

    def _window_array(t: int, asset: str) -> np.ndarray:
        if snaps is not None:
            return np.array([snaps[k][asset] for k in range(L)], dtype=np.float64)
        j = col[asset]
        return values[t - L + 1 : t + 1, j].copy()

    def _process_day(t: int) -> None:
        nonlocal prev_weights
        date = panel.dates[t]
        eligible = sorted(ids[j] for j in np.flatnonzero(runs[t] >= L))
        if len(eligible) < 2:
            raise ForecasterError(f"{date}: only {len(eligible)} eligible assets")

        if config.forecaster == "str":
            fv = str_forecast(ema, date, assets=eligible)
        elif config.forecaster == "auto-arima":
            windows = [_window_array(t, a) for a in eligible]
            if executor is not None:
                forecasts = list(executor.map(auto_arima_forecast, windows))
            else:
                forecasts = [auto_arima_forecast(w) for w in windows]
            fv = ForecastVector(date=date, scores=dict(zip(eligible, forecasts)),
                                source="auto-arima")
            if config.alpha > 0.0:
                fv = deadjust_forecast(fv, ema)
        else:  # bridge
            windows = [
                ContextWindow(asset_id=a, end_date=date, returns=_window_array(t, a))
                for a in eligible
            ]
            if config.finetune_tau is not None:
                client.finetune(date, windows, config.finetune_tau)
            fv = bridge_forecast(
                client, date, windows,
                alpha=config.alpha, num_samples=config.num_samples, seed=config.seed,
            )
            if config.alpha > 0.0:
                fv = deadjust_forecast(fv, ema)

        if config.resize:
            vol = trailing_volatility(panel, date, L)
            pw = resize_weights(centered_rank_weights(fv, config.centering), vol, date=date)
        else:
            pw = rank_weights(fv, config.centering)

        nxt_vals = values[t + 1]
        nxt_present = present[t + 1]
        gross = 0.0
        for a, w in pw.weights.items():
            j = col[a]
            if nxt_present[j]:
                gross += w * nxt_vals[j]

        turnover = 0.0
        for a, w in pw.weights.items():
            turnover += abs(w - prev_weights.get(a, 0.0))
        for a, w in prev_weights.items():
            if a not in pw.weights:
                turnover += abs(w)

        out_dates.append(date)
        out_gross.append(gross)
        out_turnover.append(turnover)
        if out_weights is not None:
            out_weights.append(pw)
        prev_weights = pw.weights

    try:
        if config.forecaster == "bridge":
            if not config.bridge_cmd:
                raise ContractError("bridge forecaster requires bridge_cmd")
            client = BridgeClient(config.bridge_cmd, timeout=config.bridge_timeout)
            client.start()
        if config.jobs > 1 and config.forecaster == "auto-arima":
            executor = ThreadPoolExecutor(max_workers=config.jobs)

        if needs_ema:
            prev_present: set[str] = set()
            last_decision = decisions[-1] if decisions else -1
            for t in range(last_decision + 1):
                row = np.flatnonzero(present[t])
                today = {ids[j] for j in row}
                ema.reset(prev_present - today)
                ema.update({ids[j]: values[t, j] for j in row})
                prev_present = today
                if snaps is not None:
                    snaps.append(dict(ema.levels))
                    if len(snaps) > L:
                        snaps.pop(0)
                if t in decision_set:
                    _process_day(t)
        else:
            for t in decisions:
                _process_day(t)
    except ResidArbError as exc:
        if out_dir is not None:
            partial = _summarize(out_dates, out_gross, out_turnover, config, out_weights)
            paths = export_result(partial, out_dir)
            report = {
                "error_type": type(exc).__name__,
                "message": str(exc),
                "completed_days": partial.n_days,
            }
            report_path = Path(out_dir) / "failure_report.json"
            report_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
            logger.error("backtest aborted (%s); partial results in %s", exc, out_dir)
        raise
    finally:
        if executor is not None:
            executor.shutdown(wait=False)
        if client is not None:
            client.shutdown()

    return _summarize(out_dates, out_gross, out_turnover, config, out_weights)


# -- export ----------------------------------------------------------------

EQUITY_COLUMNS = ("date", "gross_return", "net_return", "turnover",
                  "equity_gross", "equity_net")


def export_result(result: BacktestResult, out_dir: str | Path) -> dict[str, Path]:
    """Write equity.csv, metrics.json, and the equity-curve SVG."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        equity_path = out / "equity.csv"
        with open(equity_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(EQUITY_COLUMNS)
            for i in range(result.n_days):
                writer.writerow(
                    [
                        str(result.dates[i]),
                        repr(float(result.gross[i])),
                        repr(float(result.net[i])),
                        repr(float(result.turnover[i])),
                        repr(float(result.equity_gross[i])),
                        repr(float(result.equity_net[i])),
                    ]
                )
        metrics_path = out / "metrics.json"
        metrics_path.write_text(
            json.dumps(result.metrics(), indent=2, sort_keys=True) + "\n"
        )
        svg_path = out / "equity.svg"
        write_equity_svg(
            svg_path,
            [
                ("gross", result.dates, result.equity_gross),
                ("net", result.dates, result.equity_net),
            ],
        )
    except OSError as exc:
        raise ResidArbError(f"failed to write results under {out}: {exc}") from exc
    return {"equity": equity_path, "metrics": metrics_path, "plot": svg_path}


def export_weights_csv(weights: list[PortfolioWeights], path: str | Path) -> None:
    """Audit trail: long-format (date, asset_id, weight) rows."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "asset_id", "weight"])
        for pw in weights:
            for asset, w in pw.weights.items():
                writer.writerow([str(pw.date), asset, repr(float(w))])


def read_equity_csv(path: str | Path) -> dict[str, np.ndarray]:
    """Load an exported equity.csv back into arrays (round-trip exact)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != EQUITY_COLUMNS:
            raise ContractError(f"{path}: unexpected columns {header}")
        rows = list(reader)
    out: dict[str, np.ndarray] = {
        "date": np.array([r[0] for r in rows], dtype="datetime64[D]")
    }
    for k, name in enumerate(EQUITY_COLUMNS[1:], start=1):
        out[name] = np.array([float(r[k]) for r in rows], dtype=np.float64)
    return out


def write_equity_svg(path: str | Path, curves: list[tuple]) -> None:
    """Cumulative-return lines, date on x; one line per (label, dates, values)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(9, 4.5))
    for label, dates, vals in curves:
        if len(vals):
            ax.plot(np.asarray(dates, dtype="datetime64[D]"), vals, label=label)
    ax.set_xlabel("date")
    ax.set_ylabel("cumulative return")
    ax.grid(True, alpha=0.3)
    if any(len(vals) for _, _, vals in curves):
        ax.legend()
    fig.autofmt_xdate()
    fig.savefig(path, format="svg", bbox_inches="tight")
    plt.close(fig)
