"""Command line entry points: serve the protocol or record an archive."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from eln_embed_sidecar.model import ModelLoadError, SidecarConfig, load_model
from eln_embed_sidecar.recorder import read_text_list, record_fixtures


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embed-sidecar",
        description="Embedding service and archive recorder for the /embed protocol",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--model", default="hash:384", help="model id, e.g. hash:384")
    serve.add_argument("--bind", default="127.0.0.1:8090", help="host:port to listen on")
    serve.add_argument("--batch-size", type=int, default=32)
    serve.add_argument("--device", default="cpu", help="device hint passed to the model")

    record = sub.add_parser("record", help="embed a text list into an ELNA archive")
    record.add_argument("--texts", required=True, type=Path, help="file, one text per line")
    record.add_argument("--out", required=True, type=Path, help="archive path to write")
    record.add_argument("--model", default="hash:384")
    record.add_argument("--level", choices=("sentence", "token"), default="sentence")
    return parser


def _serve(args: argparse.Namespace) -> int:
    try:
        config = SidecarConfig(
            model=args.model,
            bind=args.bind,
            batch_size=args.batch_size,
            device=args.device,
        )
        model = load_model(config.model)
        host, port = config.host_port()
    except (ModelLoadError, ValueError) as exc:
        # Refuse to bind when the model cannot load: a listening socket with
        # no model behind it would turn every request into a 500.
        print(f"embed-sidecar: {exc}", file=sys.stderr)
        return 2

    import uvicorn

    from eln_embed_sidecar.app import create_app

    uvicorn.run(create_app(model, batch_size=config.batch_size), host=host, port=port)
    return 0


def _record(args: argparse.Namespace) -> int:
    try:
        model = load_model(args.model)
        texts = read_text_list(args.texts)
        count = record_fixtures(model, texts, args.out, level=args.level)
    except (ModelLoadError, OSError, ValueError) as exc:
        print(f"embed-sidecar: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {count} entries (dim {model.dim}) to {args.out}")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "serve":
        return _serve(args)
    return _record(args)


if __name__ == "__main__":
    sys.exit(main())
