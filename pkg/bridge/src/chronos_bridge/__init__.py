"""Forecaster bridge serving a Chronos-style T5 series model over stdio."""

from .model import (
    ARCH_PRESETS,
    ChronosBridgeModel,
    DEFAULT_MODEL_ID,
    FinetuneDiverged,
    FinetunePlan,
    GenerationSettings,
    ModelLoadError,
)
from .server import PROTOCOL_VERSION, BridgeServer
from .tokenizer import MeanScaleUniformBins

__version__ = "0.1.0"
