"""Command line entry point: load a model, then serve the wire contract."""
from __future__ import annotations

import argparse
import sys

import uvicorn

from .app import create_app
from .encoders import DEFAULT_MODEL, EncoderLoadError, load_encoder


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embedsvc",
        description="HTTP sidecar serving sentence embeddings over /embed.",
    )
    parser.add_argument(
        "--model",
        default=DEFAULT_MODEL,
        help="sentence-transformers checkpoint id or path, or hash-<dim> "
        "for the deterministic offline encoder",
    )
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8787)
    parser.add_argument("--log-level", default="info")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        encoder = load_encoder(args.model)
    except EncoderLoadError as exc:
        print(f"embedsvc: {exc}", file=sys.stderr)
        return 1
    print(
        f"embedsvc: serving {encoder.model_id} (dim {encoder.dim}) "
        f"on {args.host}:{args.port}",
        file=sys.stderr,
    )
    uvicorn.run(create_app(encoder), host=args.host, port=args.port, log_level=args.log_level)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
