"""Command-line front end: stats, run, compare, and plot subcommands.

Every run flag has a config-file equivalent (flat key = value lines, dashes
or underscores in keys); explicit flags override the file.  The effective
configuration is echoed into metrics.json so every experiment is auditable.
Exit codes: 0 success, 1 forecaster failure, 2 data/usage error, 3 bridge
failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import shlex
import sys
from pathlib import Path

from .backtest import (
    BacktestConfig,
    export_result,
    export_weights_csv,
    read_equity_csv,
    run_backtest,
    write_equity_svg,
)
from .errors import (
    BridgeError,
    ContractError,
    ForecasterError,
    ResidArbError,
)
from .panel import DatasetMeta, load_panel, summary_stats

EXIT_OK = 0
EXIT_FORECASTER = 1
EXIT_DATA = 2
EXIT_BRIDGE = 3

DATA_DIR_ENV = "RESID_ARB_DATA"

logger = logging.getLogger(__name__)


def _resolve_dataset(token: str) -> Path:
    """Resolve a dataset argument against the cwd, then $RESID_ARB_DATA."""
    direct = Path(token)
    if direct.exists():
        return direct
    base = os.environ.get(DATA_DIR_ENV)
    if base:
        for candidate in (Path(base) / token, Path(base) / f"{token}.csv"):
            if candidate.exists():
                return candidate
    return direct  # let the loader produce the canonical error message


def _infer_factor_model(path: Path) -> str | None:
    stem = path.stem.upper()
    if "IPCA" in stem:
        return "IPCA"
    if "PCA" in stem:
        return "PCA"
    if "FF" in stem or "FAMA" in stem:
        return "FF"
    return None


def _read_config_file(path: Path) -> dict[str, str]:
    """Flat key = value experiment file; '#' starts a comment."""
    out: dict[str, str] = {}
    for raw in path.read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ContractError(f"{path}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip().lower().replace("-", "_")] = value.strip()
    return out


_BOOL_TOKENS = {"true": True, "yes": True, "1": True,
                "false": False, "no": False, "0": False}


def _cast(value: str, kind):
    if kind is bool:
        try:
            return _BOOL_TOKENS[value.lower()]
        except KeyError:
            raise ContractError(f"expected a boolean, got {value!r}") from None
    return kind(value)


class _Options:
    """Flag value if given, else config-file value, else the default."""

    def __init__(self, args: argparse.Namespace, file_values: dict[str, str]):
        self.args = args
        self.file_values = file_values

    def pick(self, name: str, default, kind):
        flag = getattr(self.args, name, None)
        if flag is not None:
            return flag
        if name in self.file_values:
            return _cast(self.file_values[name], kind)
        return default


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="resid-arb",
        description="Walk-forward backtests of cross-sectional long/short "
                    "strategies on daily residual stock returns.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_stats = sub.add_parser("stats", help="dataset summary statistics")
    p_stats.add_argument("--dataset", required=True)
    p_stats.add_argument("--factor-model", choices=["ipca", "pca", "ff"])
    p_stats.add_argument("--format", choices=["table", "json"], default="table")
    p_stats.add_argument("--json-out", help="also write the JSON to this path")

    p_run = sub.add_parser("run", help="run one backtest")
    p_run.add_argument("--config", help="flat key = value experiment file")
    p_run.add_argument("--dataset")
    p_run.add_argument("--factor-model", choices=["ipca", "pca", "ff"])
    p_run.add_argument("--forecaster", choices=["str", "auto-arima", "bridge"])
    p_run.add_argument("--beta", type=float)
    p_run.add_argument("--alpha", type=float)
    p_run.add_argument("--num-samples", type=int)
    p_run.add_argument("--finetune-tau", type=int)
    p_run.add_argument("--context-length", type=int)
    p_run.add_argument("--resize", action=argparse.BooleanOptionalAction)
    p_run.add_argument("--centering", choices=["median", "paper"])
    p_run.add_argument("--cost-bps", type=float)
    p_run.add_argument("--start")
    p_run.add_argument("--end")
    p_run.add_argument("--annualization-days", type=int)
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--stride", type=int, help="decision-day stride (2 = every 2nd day)")
    p_run.add_argument("--jobs", type=int, help="within-day forecaster fan-out")
    p_run.add_argument("--bridge-cmd", help="command line for the bridge subprocess")
    p_run.add_argument("--bridge-timeout", type=float)
    p_run.add_argument("--out", help="output directory (default runs/<auto>)")
    p_run.add_argument("--export-weights", action="store_true",
                       help="also write the daily weight book (weights.csv)")

    p_cmp = sub.add_parser("compare", help="consolidate metrics.json files")
    p_cmp.add_argument("metrics", nargs="+")
    p_cmp.add_argument("--csv", help="also write the table as CSV")

    p_plot = sub.add_parser("plot", help="plot equity.csv files to SVG")
    p_plot.add_argument("equity", nargs="+")
    p_plot.add_argument("--out", required=True)

    return parser


# -- stats -------------------------------------------------------------------


def _cmd_stats(args) -> int:
    path = _resolve_dataset(args.dataset)
    model = (args.factor_model or "").upper() or _infer_factor_model(path)
    if model is None:
        print(f"error: cannot infer factor model from {path.name}; "
              f"pass --factor-model", file=sys.stderr)
        return EXIT_DATA
    try:
        panel = load_panel(path, DatasetMeta(factor_model=model, source_path=str(path)))
        stats = summary_stats(panel)
    except ResidArbError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    payload = {"factor_model": model, **stats.as_dict()}
    text = json.dumps(payload, indent=2, sort_keys=True)
    if args.format == "json":
        print(text)
    else:
        print(f"dataset   : {path}")
        print(f"factor    : {model}")
        print(f"count     : {stats.count}")
        print(f"mean      : {stats.mean:.6e}")
        print(f"sd        : {stats.sd:.6e}")
        print(f"skewness  : {stats.skewness:.4f}")
        print(f"kurtosis  : {stats.kurtosis:.2f}")
    if args.json_out:
        Path(args.json_out).write_text(text + "\n")
    return EXIT_OK


# -- run ---------------------------------------------------------------------


def _build_run_config(args, parser) -> tuple[BacktestConfig, Path, Path]:
    file_values: dict[str, str] = {}
    if args.config:
        cfg_path = Path(args.config)
        if not cfg_path.exists():
            parser.error(f"config file not found: {cfg_path}")
        file_values = _read_config_file(cfg_path)
    opt = _Options(args, file_values)

    dataset = opt.pick("dataset", None, str)
    if not dataset:
        parser.error("a dataset is required (flag --dataset or config file)")
    forecaster = opt.pick("forecaster", "str", str)
    beta = opt.pick("beta", 0.3, float)
    alpha = opt.pick("alpha", 0.0, float)
    if not (0.0 <= beta < 1.0):
        parser.error(f"beta must be in [0, 1), got {beta}")
    if not (0.0 <= alpha < 1.0):
        parser.error(f"alpha must be in [0, 1), got {alpha}")

    path = _resolve_dataset(dataset)
    model = (opt.pick("factor_model", "", str) or "").upper() or _infer_factor_model(path)
    meta = None
    if model:
        meta = DatasetMeta(factor_model=model, source_path=str(path))

    bridge_cmd_str = opt.pick("bridge_cmd", None, str)
    try:
        config = BacktestConfig(
            forecaster=forecaster,
            beta=beta,
            alpha=alpha,
            num_samples=opt.pick("num_samples", 20, int),
            finetune_tau=opt.pick("finetune_tau", None, int),
            context_length=opt.pick("context_length", 100, int),
            resize=opt.pick("resize", False, bool),
            centering=opt.pick("centering", "median", str),
            cost_bps=opt.pick("cost_bps", 3.0, float),
            start_date=opt.pick("start", None, str),
            end_date=opt.pick("end", None, str),
            annualization_days=opt.pick("annualization_days", 252, int),
            seed=opt.pick("seed", 0, int),
            decision_stride=opt.pick("stride", 1, int),
            jobs=opt.pick("jobs", 1, int),
            bridge_cmd=shlex.split(bridge_cmd_str) if bridge_cmd_str else None,
            bridge_timeout=opt.pick("bridge_timeout", 600.0, float),
            dataset=meta,
        )
    except ContractError as exc:
        parser.error(str(exc))

    out = opt.pick("out", None, str)
    out_dir = Path(out) if out else Path("runs") / f"{forecaster}-{path.stem}"
    return config, path, out_dir


def _cmd_run(args, parser) -> int:
    config, path, out_dir = _build_run_config(args, parser)
    try:
        panel = load_panel(path, config.dataset)
    except ResidArbError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    try:
        result = run_backtest(panel, config, out_dir=out_dir,
                              record_weights=args.export_weights)
    except BridgeError as exc:
        print(f"bridge failure: {exc}", file=sys.stderr)
        return EXIT_BRIDGE
    except ForecasterError as exc:
        print(f"forecaster failure: {exc}", file=sys.stderr)
        return EXIT_FORECASTER
    except ResidArbError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA

    export_result(result, out_dir)
    if args.export_weights and result.weights is not None:
        export_weights_csv(result.weights, out_dir / "weights.csv")

    def _fmt(x):
        return "n/a" if x is None else f"{x:.3f}"

    print(
        f"{config.forecaster} on {path.name}: "
        f"sharpe_gross={_fmt(result.sharpe_gross)} "
        f"sharpe_net={_fmt(result.sharpe_net)} "
        f"t_stat={_fmt(result.t_stat)} "
        f"n_days={result.n_days} out={out_dir}"
    )
    return EXIT_OK


# -- compare -----------------------------------------------------------------

_REQUIRED_METRIC_KEYS = {"sharpe_gross", "sharpe_net", "n_days", "config"}


def _describe_params(config: dict) -> str:
    fc = config.get("forecaster", "?")
    if fc == "str":
        return f"beta={config.get('beta')}"
    if fc == "bridge":
        tau = config.get("finetune_tau")
        extra = f" tau={tau}" if tau is not None else ""
        return f"alpha={config.get('alpha')}{extra}"
    return f"alpha={config.get('alpha')}"


def _cmd_compare(args) -> int:
    rows = []
    for token in args.metrics:
        path = Path(token)
        try:
            payload = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: {path}: {exc}", file=sys.stderr)
            return EXIT_DATA
        if not isinstance(payload, dict) or not _REQUIRED_METRIC_KEYS <= set(payload):
            print(f"error: {path}: not a metrics.json (schema mismatch)", file=sys.stderr)
            return EXIT_DATA
        config = payload["config"]
        meta = config.get("dataset") or {}
        dataset = meta.get("factor_model") or Path(meta.get("source_path") or "?").name
        rows.append(
            {
                "forecaster": config.get("forecaster", "?"),
                "dataset": dataset,
                "params": _describe_params(config),
                "resize": bool(config.get("resize")),
                "sharpe_gross": payload["sharpe_gross"],
                "sharpe_net": payload["sharpe_net"],
                "n_days": payload["n_days"],
            }
        )
    rows.sort(key=lambda r: (r["sharpe_gross"] is None,
                             -(r["sharpe_gross"] or 0.0)))

    header = ["forecaster", "dataset", "params", "resize",
              "sharpe_gross", "sharpe_net", "n_days"]
    widths = [max(len(h), *(len(_cell(r[h])) for r in rows)) for h in header]
    print("  ".join(h.ljust(w) for h, w in zip(header, widths)))
    for r in rows:
        print("  ".join(_cell(r[h]).ljust(w) for h, w in zip(header, widths)))

    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=header)
            writer.writeheader()
            writer.writerows(rows)
    return EXIT_OK


def _cell(value) -> str:
    if value is None:
        return "n/a"
    if isinstance(value, float):
        return f"{value:.3f}"
    return str(value)


# -- plot --------------------------------------------------------------------


def _cmd_plot(args) -> int:
    curves = []
    for token in args.equity:
        path = Path(token)
        try:
            data = read_equity_csv(path)
        except (OSError, ResidArbError) as exc:
            print(f"error: {path}: {exc}", file=sys.stderr)
            return EXIT_DATA
        curves.append((f"{path.parent.name or path.stem} gross",
                       data["date"], data["equity_gross"]))
        curves.append((f"{path.parent.name or path.stem} net",
                       data["date"], data["equity_net"]))
    write_equity_svg(args.out, curves)
    print(f"wrote {args.out}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.command == "stats":
        return _cmd_stats(args)
    if args.command == "run":
        return _cmd_run(args, parser)
    if args.command == "compare":
        return _cmd_compare(args)
    if args.command == "plot":
        return _cmd_plot(args)
    parser.error(f"unknown command {args.command!r}")
    return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
