"""
Command-line entry point: `python -m pricepanel <subcommand> ...`.

Each subcommand lives in `pricepanel.commands`. Failures print
`<stage>: <message>` on stderr and exit with status 1.
"""
from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from . import __version__
from .commands import build_panel, did, fit, ingest, plot_data, report, run_all, simulate
from .deps import configure_logging
from .errors import StageError

COMMANDS = [ingest, build_panel, fit, did, report, plot_data, simulate, run_all]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pricepanel",
        description="Pricing-panel pipeline, event-study estimation and DiD summaries.",
    )
    parser.add_argument("--version", action="version", version=f"pricepanel {__version__}")
    parser.add_argument("--log-level", help="logging level (default: PANEL_LOG_LEVEL or INFO)")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for command in COMMANDS:
        command.add_parser(sub)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level)
    try:
        args.handler(args)
    except StageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    return 0
