#!/usr/bin/env python3
"""Minimal forecaster bridge: echoes each window's last value as the forecast.

Demonstrates the wire protocol a real model server implements; launch it via
`--bridge-cmd "python3 demos/echo_bridge.py"` or spawn it from the demo.
"""
import json
import sys


def send(obj):
    sys.stdout.write(json.dumps(obj, separators=(",", ":")) + "\n")
    sys.stdout.flush()


for line in sys.stdin:
    msg = json.loads(line)
    kind, rid = msg.get("kind"), msg.get("request_id")
    if kind == "hello":
        send({"kind": "hello_ack", "request_id": rid, "model_id": "demo/echo",
              "n_parameters": 0, "protocol_version": "1"})
    elif kind == "forecast_request":
        forecasts = {s["asset_id"]: s["context"][-1] for s in msg["series"]}
        send({"kind": "forecast_response", "request_id": rid,
              "forecasts": forecasts})
    elif kind == "finetune_request":
        send({"kind": "finetune_ack", "request_id": rid,
              "steps_done": 10 * int(msg.get("tau", 0)), "loss_last": 0.0})
    elif kind == "shutdown":
        sys.exit(0)
    else:
        send({"kind": "error", "request_id": rid,
              "message": f"unknown kind {kind!r}"})
