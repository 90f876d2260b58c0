"""Command line entry point.

    stylizerd serve [--config cfg.yaml] [--http HOST:PORT | --stdio]
    stylizerd print-config

Exit codes: 0 success, 2 configuration problem, 3 model load failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

import yaml

from .config import BackendConfig, load_config
from .errors import ConfigError, ModelLoadError
from .serve import serve_http, serve_stdio
from .service import AdapterService


def _parse_endpoint(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise ConfigError(f"--http wants HOST:PORT, got {text!r}")
    return host or "127.0.0.1", int(port)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stylizerd", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the backend service")
    serve.add_argument("--config", help="YAML config file (defaults apply when omitted)")
    mode = serve.add_mutually_exclusive_group()
    mode.add_argument("--http", default="127.0.0.1:8790", help="HOST:PORT to listen on")
    mode.add_argument("--stdio", action="store_true", help="speak line-delimited JSON on stdin/stdout")
    serve.add_argument("-v", "--verbose", action="store_true")

    sub.add_parser("print-config", help="dump the default config as YAML")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "print-config":
        print(yaml.safe_dump(dataclasses.asdict(BackendConfig()), sort_keys=False).rstrip())
        return 0
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = load_config(args.config) if args.config else BackendConfig().validate()
        endpoint = None if args.stdio else _parse_endpoint(args.http)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    try:
        service = AdapterService(config)
    except ModelLoadError as e:
        print(f"model load failure: {e}", file=sys.stderr)
        return 3
    try:
        if args.stdio:
            serve_stdio(service)
        else:
            serve_http(service, *endpoint)
    except KeyboardInterrupt:
        pass
    return 0


if __name__ == "__main__":
    sys.exit(main())
