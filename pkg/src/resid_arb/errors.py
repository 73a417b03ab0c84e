"""Exception types shared across the engine."""


class ResidArbError(Exception):
    """Base class for every error raised by this package."""


class PanelParseError(ResidArbError):
    """Malformed cell, date, or structure in an input dataset file."""


class PanelValidationError(ResidArbError):
    """Structurally invalid panel (duplicate dates, shape mismatch, ...)."""


class InsufficientDataError(ResidArbError):
    """Not enough observations for the requested statistic."""


class InsufficientHistoryError(ResidArbError):
    """Date has fewer prior trading days than the required window."""


class ContractError(ResidArbError):
    """Caller violated an operation's preconditions."""


class DegenerateUniverseError(ResidArbError):
    """Fewer than two assets available to build a portfolio."""


class UndefinedSharpeError(ResidArbError):
    """Sharpe ratio requested on a series with zero variance."""


class ArimaFitError(ResidArbError):
    """A single ARIMA candidate could not be fit (explosive, degenerate...).

    The automatic order search treats this as "skip the candidate", so it
    only surfaces to callers of the single-order fit.
    """


class ForecasterError(ResidArbError):
    """A forecaster failed on a backtest day; the run aborts."""


class BridgeError(ForecasterError):
    """Base class for external-forecaster bridge failures."""


class BridgeDownError(BridgeError):
    """The bridge subprocess exited or closed its stream."""


class BridgeTimeoutError(BridgeError):
    """No response within the configured deadline."""


class BridgeProtocolError(BridgeError):
    """Malformed frame, unexpected kind, or mismatched request id."""
