"""Entry point: load (or build) the model, then serve the stdio protocol.

    python -m chronos_bridge --model amazon/chronos-t5-tiny
    python -m chronos_bridge --random-init --arch micro --init-seed 7

A model-load failure emits an error frame on stdout and exits with code 3.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .model import ChronosBridgeModel, DEFAULT_MODEL_ID, ModelLoadError
from .server import BridgeServer


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chronos-bridge", description=__doc__)
    parser.add_argument("--model", default=DEFAULT_MODEL_ID,
                        help="HF model id or local checkpoint directory")
    parser.add_argument("--random-init", action="store_true",
                        help="build the architecture locally with random weights")
    parser.add_argument("--arch", choices=["tiny", "micro"], default="tiny",
                        help="architecture preset for --random-init")
    parser.add_argument("--init-seed", type=int, default=1234,
                        help="weight-init seed for --random-init")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--fault-inject", choices=["nan-loss"], default=None,
                        help="test hook: force a non-finite training loss")
    parser.add_argument("--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="chronos-bridge %(levelname)s: %(message)s",
    )
    try:
        if args.random_init:
            model = ChronosBridgeModel.random_init(
                arch=args.arch, seed=args.init_seed, device=args.device)
        else:
            model = ChronosBridgeModel.from_pretrained(
                args.model, device=args.device)
    except ModelLoadError as exc:
        frame = {"kind": "error", "request_id": 0, "message": str(exc)}
        sys.stdout.write(json.dumps(frame, separators=(",", ":")) + "\n")
        sys.stdout.flush()
        return 3
    return BridgeServer(model, fault=args.fault_inject).run()


if __name__ == "__main__":
    sys.exit(main())
