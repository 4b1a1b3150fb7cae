"""Command line entry point: ``qfsmodel <command> [--config FILE] [--set key=value ...]``.

Exit codes: 1 usage, 2 I/O, 3 data validation, 4 numeric failure.
Log level comes from ``QFSMODEL_LOG_LEVEL`` (default INFO).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from typing import Any, Sequence

from .pipeline import STAGES, PipelineConfig, stage_rank

log = logging.getLogger("qfsmodel")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qfsmodel", description="Masked proxy-query evidence ranking pipeline.")
    p.add_argument("command", choices=sorted(STAGES), metavar="command",
                   help="one of: " + ", ".join(sorted(STAGES)))
    p.add_argument("--config", help="flat JSON config file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config key; VALUE is parsed as JSON when possible")
    p.add_argument("--output-dir", help="shortcut for --set output_dir=...")
    p.add_argument("--workers", type=int, help="worker processes for pair construction")
    p.add_argument("--emit-requests", action="store_true",
                   help="rank: write score requests for an external scorer instead of ranking")
    return p


def _parse_overrides(items: Sequence[str]) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for item in items:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        try:
            out[key] = json.loads(raw)
        except json.JSONDecodeError:
            out[key] = raw
    return out


def _setup_logging() -> None:
    level = os.environ.get("QFSMODEL_LOG_LEVEL", "INFO").upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO), stream=sys.stderr,
                        format="%(message)s")


def run(command: str, cfg: PipelineConfig, emit_requests: bool = False) -> dict[str, Any]:
    if command not in STAGES:
        raise UsageError(f"unknown command {command!r}")
    t0 = time.perf_counter()
    if command == "rank":
        counts = stage_rank(cfg, emit_requests)
    else:
        counts = STAGES[command](cfg)
    log.info(json.dumps({"stage": command, "seconds": round(time.perf_counter() - t0, 3), **counts},
                        sort_keys=True, default=str))
    return counts


def main(argv: Sequence[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        overrides = _parse_overrides(args.set)
        if args.output_dir:
            overrides["output_dir"] = args.output_dir
        if args.workers is not None:
            overrides["workers"] = args.workers
    except UsageError as exc:
        print(f"qfsmodel: error: {exc}", file=sys.stderr)
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    try:
        cfg = PipelineConfig.load(args.config, overrides)
        run(args.command, cfg, args.emit_requests)
    except UsageError as exc:
        print(f"qfsmodel: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FloatingPointError as exc:
        log.error(json.dumps({"stage": args.command, "error": "numeric", "detail": str(exc)}))
        return EXIT_NUMERIC
    except (OSError, UnicodeDecodeError) as exc:
        log.error(json.dumps({"stage": args.command, "error": "io", "detail": str(exc)}))
        return EXIT_IO
    except (ValueError, KeyError, TypeError) as exc:
        # json.JSONDecodeError is a ValueError
        log.error(json.dumps({"stage": args.command, "error": "validation", "detail": str(exc)}))
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
