"""Client for external forecaster subprocesses.

Transport is newline-delimited JSON over the child's stdin/stdout, one frame
per line, UTF-8, one in-flight request at a time.  Frames carry a strictly
increasing request_id and the server must answer every request exactly once,
in order.  A scripted double (tests/doubles/scripted_bridge.py) stands in for
the real model server in the protocol suite.
"""
from __future__ import annotations

import json
import logging
import queue
import subprocess
import threading
import time
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    BridgeDownError,
    BridgeProtocolError,
    BridgeTimeoutError,
    ContractError,
)
from .panel import ContextWindow
from .signal import ForecastVector

logger = logging.getLogger(__name__)

PROTOCOL_VERSION = "1"

_EOF = object()


def _dump(frame: dict) -> str:
    return json.dumps(frame, separators=(",", ":"))


class BridgeClient:
    """Spawns and talks to a forecaster subprocess.

    Usage: client = BridgeClient(cmd); client.start(); ... client.shutdown().
    Also usable as a context manager.
    """

    def __init__(self, cmd: Sequence[str], timeout: float = 600.0):
        if not cmd:
            raise ContractError("bridge command is empty")
        self.cmd = list(cmd)
        self.timeout = timeout
        self.proc: subprocess.Popen | None = None
        self._lines: queue.Queue = queue.Queue()
        self._next_id = 0
        self.server_info: dict = {}

    # -- lifecycle ---------------------------------------------------------

    def start(self) -> dict:
        """Spawn the subprocess and handshake; returns the server info."""
        self.proc = subprocess.Popen(
            self.cmd,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            encoding="utf-8",
            bufsize=1,
        )
        reader = threading.Thread(target=self._pump, daemon=True)
        reader.start()
        ack = self._request({"kind": "hello", "request_id": self._take_id()})
        if ack.get("kind") != "hello_ack":
            raise BridgeProtocolError(f"expected hello_ack, got {ack.get('kind')!r}")
        version = ack.get("protocol_version")
        if version != PROTOCOL_VERSION:
            raise BridgeProtocolError(f"unsupported protocol version {version!r}")
        self.server_info = {k: v for k, v in ack.items() if k not in ("kind", "request_id")}
        return self.server_info

    def shutdown(self) -> None:
        if self.proc is None:
            return
        if self.proc.poll() is None:
            try:
                self._send({"kind": "shutdown", "request_id": self._take_id()})
            except BridgeDownError:
                pass
            try:
                self.proc.wait(timeout=10.0)
            except subprocess.TimeoutExpired:
                self.proc.kill()
                self.proc.wait()
        self.proc = None

    def __enter__(self) -> "BridgeClient":
        self.start()
        return self

    def __exit__(self, *exc) -> None:
        self.shutdown()

    @property
    def alive(self) -> bool:
        return self.proc is not None and self.proc.poll() is None

    # -- requests ----------------------------------------------------------

    def forecast(
        self,
        date,
        windows: Iterable[ContextWindow],
        num_samples: int = 20,
        seed: int = 0,
    ) -> dict[str, float]:
        """Send a forecast_request; returns asset -> mean-of-samples forecast."""
        series = [
            {"asset_id": w.asset_id, "context": [float(v) for v in w.returns]}
            for w in windows
        ]
        if not series:
            raise ContractError("forecast needs at least one context window")
        frame = {
            "kind": "forecast_request",
            "request_id": self._take_id(),
            "num_samples": int(num_samples),
            "seed": int(seed),
            "series": series,
        }
        reply = self._request(frame)
        self._expect(reply, "forecast_request", "forecast_response")
        forecasts = reply.get("forecasts")
        if not isinstance(forecasts, dict):
            raise BridgeProtocolError("forecast_response without forecasts object")
        out = {}
        for item in series:
            asset = item["asset_id"]
            if asset not in forecasts:
                raise BridgeProtocolError(f"no forecast returned for asset {asset!r}")
            value = float(forecasts[asset])
            if not np.isfinite(value):
                raise BridgeProtocolError(f"non-finite forecast for asset {asset!r}")
            out[asset] = value
        return out

    def finetune(self, date, windows: Iterable[ContextWindow], tau: int) -> dict:
        """Send one day's finetune_request; returns the ack payload."""
        panel = [
            {"asset_id": w.asset_id, "returns": [float(v) for v in w.returns]}
            for w in windows
        ]
        frame = {
            "kind": "finetune_request",
            "request_id": self._take_id(),
            "date": str(np.datetime64(date, "D")),
            "tau": int(tau),
            "panel": panel,
        }
        reply = self._request(frame)
        self._expect(reply, "finetune_request", "finetune_ack")
        return {k: v for k, v in reply.items() if k not in ("kind", "request_id")}

    # -- plumbing ----------------------------------------------------------

    def _take_id(self) -> int:
        rid = self._next_id
        self._next_id += 1
        return rid

    def _pump(self) -> None:
        proc = self.proc
        assert proc is not None and proc.stdout is not None
        for line in proc.stdout:
            self._lines.put(line)
        self._lines.put(_EOF)

    def _send(self, frame: dict) -> None:
        if self.proc is None or self.proc.stdin is None:
            raise BridgeDownError("bridge not started")
        try:
            self.proc.stdin.write(_dump(frame) + "\n")
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise BridgeDownError(f"bridge stdin closed: {exc}") from exc

    def _request(self, frame: dict) -> dict:
        self._send(frame)
        deadline = time.monotonic() + self.timeout
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise BridgeTimeoutError(
                    f"no response to request {frame['request_id']} within {self.timeout}s"
                )
            try:
                line = self._lines.get(timeout=min(remaining, 0.1))
            except queue.Empty:
                if not self.alive:
                    code = self.proc.poll() if self.proc else None
                    raise BridgeDownError(f"bridge exited with code {code}") from None
                continue
            if line is _EOF:
                code = self.proc.poll() if self.proc else None
                raise BridgeDownError(f"bridge closed its stream (exit code {code})")
            text = line.strip()
            if not text:
                continue
            try:
                reply = json.loads(text)
            except json.JSONDecodeError as exc:
                raise BridgeProtocolError(f"malformed JSON from bridge: {text!r}") from exc
            if not isinstance(reply, dict):
                raise BridgeProtocolError(f"non-object frame from bridge: {text!r}")
            if reply.get("request_id") != frame["request_id"]:
                raise BridgeProtocolError(
                    f"response id {reply.get('request_id')} does not match "
                    f"request id {frame['request_id']}"
                )
            return reply

    @staticmethod
    def _expect(reply: dict, request_kind: str, want: str) -> None:
        kind = reply.get("kind")
        if kind == "error":
            raise BridgeProtocolError(
                f"bridge error for {request_kind}: {reply.get('message')!r}"
            )
        if kind != want:
            raise BridgeProtocolError(f"expected {want}, got {kind!r}")


def bridge_forecast(
    client: BridgeClient,
    date,
    windows: Sequence[ContextWindow],
    alpha: float = 0.0,
    num_samples: int = 20,
    seed: int = 0,
) -> ForecastVector:
    """Fetch raw bridge forecasts for one day.

    When alpha > 0 the windows are EMA-space and so are the returned scores;
    the caller removes the carry with signal.deadjust_forecast.
    """
    if not windows:
        raise ContractError("bridge_forecast needs a nonempty window list")
    if not (0.0 <= alpha < 1.0):
        raise ContractError(f"alpha must be in [0, 1), got {alpha}")
    scores = client.forecast(date, windows, num_samples=num_samples, seed=seed)
    return ForecastVector(date=np.datetime64(date, "D"), scores=scores, source="bridge")
