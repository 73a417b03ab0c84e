#!/usr/bin/env python3
"""Scripted stand-in for a forecaster bridge; behavior picked by argv[1].

Modes:
  echo      forecast = last context value (default)
  fixed     forecast = 0.001 for every asset
  delay     sleep argv[2] seconds before each forecast response
  drop      never answer forecast requests
  crash     exit(1) when the first forecast request arrives
  garbage   emit a non-JSON line instead of the first forecast response
  wrong_id  answer forecasts with request_id + 1
  refuse    answer every forecast with an error frame
"""
import json
import sys
import time

MODE = sys.argv[1] if len(sys.argv) > 1 else "echo"
ARG = float(sys.argv[2]) if len(sys.argv) > 2 else 0.0


def send(obj):
    sys.stdout.write(json.dumps(obj, separators=(",", ":")) + "\n")
    sys.stdout.flush()


def main():
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        msg = json.loads(line)
        kind = msg.get("kind")
        rid = msg.get("request_id")
        if kind == "hello":
            send({
                "kind": "hello_ack",
                "request_id": rid,
                "model_id": f"double/{MODE}",
                "n_parameters": 0,
                "protocol_version": "1",
            })
        elif kind == "forecast_request":
            if MODE == "drop":
                continue
            if MODE == "crash":
                sys.exit(1)
            if MODE == "refuse":
                send({"kind": "error", "request_id": rid, "message": "refused"})
                continue
            if MODE == "garbage":
                sys.stdout.write("this is not json\n")
                sys.stdout.flush()
                continue
            if MODE == "delay":
                time.sleep(ARG)
            if MODE == "fixed":
                forecasts = {s["asset_id"]: 0.001 for s in msg["series"]}
            else:
                forecasts = {s["asset_id"]: s["context"][-1] for s in msg["series"]}
            out_rid = rid + 1 if MODE == "wrong_id" else rid
            send({"kind": "forecast_response", "request_id": out_rid,
                  "forecasts": forecasts})
        elif kind == "finetune_request":
            send({
                "kind": "finetune_ack",
                "request_id": rid,
                "steps_done": 10 * int(msg.get("tau", 0)),
                "loss_last": 0.125,
            })
        elif kind == "shutdown":
            sys.exit(0)
        else:
            send({"kind": "error", "request_id": rid,
                  "message": f"unknown kind {kind!r}"})


if __name__ == "__main__":
    main()
