"""The stdio request loop: newline-delimited JSON frames, answered in order.

One frame per line, UTF-8.  Every well-formed request gets exactly one reply
carrying the same request_id; malformed or out-of-order frames get an error
reply and the session continues.  `shutdown` ends the loop cleanly.
"""
from __future__ import annotations

import json
import logging
import sys

import numpy as np
import torch

from .model import ChronosBridgeModel, FinetuneDiverged, FinetunePlan

logger = logging.getLogger(__name__)

PROTOCOL_VERSION = "1"
MAX_CONTEXT = 100


def _dump(frame: dict) -> str:
    return json.dumps(frame, separators=(",", ":"))


class BridgeServer:
    def __init__(self, model: ChronosBridgeModel, fault: str | None = None):
        self.model = model
        self.fault = fault
        self._last_id: int | None = None

    # -- frame handlers; each returns the reply frame -------------------------

    def handle(self, msg: dict) -> dict:
        rid = msg.get("request_id")
        if not isinstance(rid, int):
            return self._error(None, "missing or non-integer request_id")
        if self._last_id is not None and rid <= self._last_id:
            return self._error(rid, f"request_id {rid} is not increasing")
        self._last_id = rid

        kind = msg.get("kind")
        if kind == "hello":
            return {
                "kind": "hello_ack",
                "request_id": rid,
                "model_id": self.model.model_id,
                "n_parameters": self.model.n_parameters(),
                "protocol_version": PROTOCOL_VERSION,
            }
        if kind == "forecast_request":
            return self._forecast(rid, msg)
        if kind == "finetune_request":
            return self._finetune(rid, msg)
        return self._error(rid, f"unknown kind {kind!r}")

    def _forecast(self, rid: int, msg: dict) -> dict:
        series = msg.get("series")
        if not isinstance(series, list) or not series:
            return self._error(rid, "forecast_request needs a nonempty series list")
        num_samples = msg.get("num_samples", 20)
        seed = msg.get("seed", 0)
        if not isinstance(num_samples, int) or num_samples < 1:
            return self._error(rid, f"invalid num_samples {num_samples!r}")
        contexts, assets = [], []
        for item in series:
            asset = item.get("asset_id")
            context = item.get("context")
            if not isinstance(asset, str) or not isinstance(context, list) or not context:
                return self._error(rid, "each series needs asset_id and a context list")
            if len(context) > MAX_CONTEXT:
                return self._error(
                    rid, f"context too long for {asset}: {len(context)} > {MAX_CONTEXT}")
            arr = np.asarray(context, dtype=np.float64)
            if not np.all(np.isfinite(arr)):
                return self._error(rid, f"non-finite context for {asset}")
            assets.append(asset)
            contexts.append(arr)
        try:
            means = self.model.forecast(contexts, num_samples=num_samples,
                                        seed=int(seed))
        except torch.cuda.OutOfMemoryError as exc:
            return self._error(rid, f"out of memory: {exc}")
        except RuntimeError as exc:
            if "out of memory" in str(exc).lower():
                return self._error(rid, f"out of memory: {exc}")
            raise
        forecasts = {a: float(m) for a, m in zip(assets, means)}
        return {"kind": "forecast_response", "request_id": rid,
                "forecasts": forecasts}

    def _finetune(self, rid: int, msg: dict) -> dict:
        panel = msg.get("panel")
        if not isinstance(panel, list) or not panel:
            return self._error(rid, "finetune_request needs a nonempty panel")
        tau = msg.get("tau")
        if not isinstance(tau, int) or tau < 0:
            return self._error(rid, f"invalid tau {tau!r}")
        windows: dict[str, np.ndarray] = {}
        for item in panel:
            asset = item.get("asset_id")
            returns = item.get("returns")
            if not isinstance(asset, str) or not isinstance(returns, list):
                return self._error(rid, "each panel row needs asset_id and returns")
            windows[asset] = np.asarray(returns, dtype=np.float64)
        plan = FinetunePlan(tau=tau)
        try:
            steps_done, last_loss = self.model.finetune_day(
                windows, plan, seed=rid, fault=self.fault)
        except FinetuneDiverged as exc:
            return self._error(rid, f"finetune diverged, weights rolled back: {exc}")
        except ValueError as exc:
            return self._error(rid, str(exc))
        loss_out = None if not np.isfinite(last_loss) else last_loss
        return {"kind": "finetune_ack", "request_id": rid,
                "steps_done": steps_done, "loss_last": loss_out}

    @staticmethod
    def _error(rid, message: str) -> dict:
        return {"kind": "error", "request_id": rid, "message": message}

    # -- loop ------------------------------------------------------------------

    def run(self, stdin=None, stdout=None) -> int:
        stdin = stdin or sys.stdin
        stdout = stdout or sys.stdout
        for line in stdin:
            line = line.strip()
            if not line:
                continue
            try:
                msg = json.loads(line)
            except json.JSONDecodeError:
                stdout.write(_dump(self._error(None, "malformed JSON frame")) + "\n")
                stdout.flush()
                continue
            if not isinstance(msg, dict):
                stdout.write(_dump(self._error(None, "frame must be an object")) + "\n")
                stdout.flush()
                continue
            if msg.get("kind") == "shutdown":
                logger.info("shutdown frame received")
                return 0
            reply = self.handle(msg)
            stdout.write(_dump(reply) + "\n")
            stdout.flush()
        logger.info("stdin closed, exiting")
        return 0
