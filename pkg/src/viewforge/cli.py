"""The view-forge command line: generate, stats, validate.

Exit codes: 0 success, 1 invalid config, 2 I/O failure.  Verbosity is
controlled by the VIEW_FORGE_LOG environment variable (debug, info,
warning, error); default shows warnings.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace

from .config import validate_config
from .pipeline import run_generate, run_stats

_LEVELS = {
    "debug": logging.DEBUG,
    "info": logging.INFO,
    "warning": logging.WARNING,
    "error": logging.ERROR,
}


def _setup_logging() -> None:
    logger = logging.getLogger("viewforge")
    logger.setLevel(_LEVELS.get(os.environ.get("VIEW_FORGE_LOG", "").lower(), logging.WARNING))
    # rebind to the current stderr every invocation; long-lived handlers
    # would otherwise hold a stale stream under test harnesses
    for handler in list(logger.handlers):
        if getattr(handler, "_viewforge_cli", False):
            logger.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler._viewforge_cli = True  # type: ignore[attr-defined]
    handler.setFormatter(logging.Formatter("%(levelname)s: %(message)s"))
    logger.addHandler(handler)
    logger.propagate = False


def _cmd_generate(args: argparse.Namespace) -> int:
    cfg = validate_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, master_seed=args.seed)
    if args.workers is not None:
        cfg = replace(cfg, workers=args.workers)
    summary = run_generate(cfg)
    print(
        f"pairs={summary.pairs_emitted} warnings={len(summary.warnings)} "
        f"wall_time={summary.wall_time:.2f}s"
    )
    return 0


def _cmd_stats(args: argparse.Namespace) -> int:
    summary = run_stats(args.manifest, args.out, args.svg)
    line = f"rows={summary.rows} csv={summary.csv_path}"
    if summary.svg_path is not None:
        line += f" svg={summary.svg_path}"
    print(line)
    return 0


def _cmd_validate(args: argparse.Namespace) -> int:
    validate_config(args.config)
    print(f"OK: {args.config}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="view-forge",
        description="Deterministic contrastive-view synthesis over an image corpus.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="run a batch and write PNGs plus a manifest")
    gen.add_argument("--config", required=True, help="path to a YAML run config")
    gen.add_argument("--seed", type=int, default=None, help="override master_seed")
    gen.add_argument("--workers", type=int, default=None, help="override worker count")
    gen.set_defaults(func=_cmd_generate)

    stats = sub.add_parser("stats", help="summarize a manifest into CSV (and SVG)")
    stats.add_argument("--manifest", required=True, help="manifest.ndjson from a run")
    stats.add_argument("--out", required=True, help="destination CSV path")
    stats.add_argument("--svg", default=None, help="optional histogram SVG path")
    stats.set_defaults(func=_cmd_stats)

    val = sub.add_parser("validate", help="check a config file and exit")
    val.add_argument("--config", required=True, help="path to a YAML run config")
    val.set_defaults(func=_cmd_validate)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    _setup_logging()
    try:
        return args.func(args)
    except ValueError as e:  # ConfigError included
        print(e, file=sys.stderr)
        return 1
    except OSError as e:
        print(e, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
