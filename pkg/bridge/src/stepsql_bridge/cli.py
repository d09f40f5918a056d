"""Bridge command line: serve the endpoints or finetune a stage model.

Port and mode can come from flags or the STEPSQL_BRIDGE_PORT /
STEPSQL_BRIDGE_MODE environment variables (flags win).
"""

from __future__ import annotations

import argparse
import os
import sys

from .models import TrainingConfig, finetune
from .records import RecordFormatError
from .service import create_app


def cmd_serve(args) -> int:
    import uvicorn

    app = create_app(mode=args.mode, fixtures=args.fixtures, models_dir=args.models)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_finetune(args) -> int:
    config = TrainingConfig.load(args.config)
    if args.epochs is not None:
        config.epochs = args.epochs
    if args.learning_rate is not None:
        config.learning_rate = args.learning_rate
    stats = finetune(args.stage, args.records, args.out, config)
    for key, value in stats.items():
        print(f"{key}: {value}")
    print(f"wrote artifact to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stepsql-bridge")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument(
        "--port", type=int, default=int(os.environ.get("STEPSQL_BRIDGE_PORT", "8640"))
    )
    p.add_argument(
        "--mode",
        choices=("stub", "model"),
        default=os.environ.get("STEPSQL_BRIDGE_MODE", "stub"),
    )
    p.add_argument("--fixtures", default=None, help="fixture table (stub mode)")
    p.add_argument("--models", default=None, help="artifact directory (model mode)")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("finetune", help="train a stage model on a record file")
    p.add_argument("--stage", required=True, choices=("table", "column", "sqlgen", "valuefill"))
    p.add_argument("--records", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None, help="training config JSON")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--learning-rate", type=float, default=None)
    p.set_defaults(func=cmd_finetune)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (RecordFormatError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
