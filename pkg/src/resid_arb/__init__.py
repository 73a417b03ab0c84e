"""Walk-forward backtesting of cross-sectional long/short strategies on
daily residual stock returns."""

from .arima import (
    DEFAULT_ORDER_GRID,
    ArimaFit,
    ArimaOrder,
    arima_fit,
    auto_arima_forecast,
    auto_arima_select,
    one_step_forecast,
)
from .backtest import (
    BacktestConfig,
    BacktestResult,
    apply_costs,
    export_result,
    export_weights_csv,
    read_equity_csv,
    run_backtest,
    sharpe,
    t_statistic,
)
from .bridge import BridgeClient, bridge_forecast
from .errors import (
    ArimaFitError,
    BridgeDownError,
    BridgeError,
    BridgeProtocolError,
    BridgeTimeoutError,
    ContractError,
    DegenerateUniverseError,
    ForecasterError,
    InsufficientDataError,
    InsufficientHistoryError,
    PanelParseError,
    PanelValidationError,
    ResidArbError,
    UndefinedSharpeError,
)
from .panel import (
    ContextWindow,
    DatasetMeta,
    PanelStats,
    ResidualPanel,
    context_windows,
    eligible_assets,
    load_panel,
    save_panel,
    summary_stats,
)
from .portfolio import (
    PortfolioWeights,
    VolatilityVector,
    centered_rank_weights,
    rank_weights,
    resize_weights,
    trailing_volatility,
    vol_scaling_factors,
)
from .signal import (
    EmaState,
    ForecastVector,
    deadjust_forecast,
    ema_transform_window,
    ema_update,
    str_forecast,
)

__version__ = "0.1.0"
