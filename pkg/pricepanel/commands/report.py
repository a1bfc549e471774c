"""`report`: render the event-study table for a treated fit and an optional control fit."""
from __future__ import annotations

import argparse
from pathlib import Path
from typing import Optional

from ..services.report import TableFormat, render_table
from . import load_fit, stage
from .did import split_list

STAGE = "report"
SUFFIX = {"latex": ".tex", "csv": ".csv"}


def run_report(
    fit_treated: str | Path,
    fit_control: Optional[str | Path],
    out_dir: str | Path,
    fmt: TableFormat = "latex",
    name: str = "event_study",
) -> Path:
    fit_t = load_fit(fit_treated)
    fit_c = load_fit(fit_control) if fit_control else None
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{name}{SUFFIX[fmt]}"
    path.write_text(render_table(fit_t, fit_c, fmt), encoding="utf-8")
    return path


def add_parser(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser(STAGE, help="render event-study tables")
    p.add_argument("--fits", required=True, help="treated fit.json[,control fit.json]")
    p.add_argument("--format", choices=["latex", "csv"], default="latex")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> None:
    with stage(STAGE):
        fits = split_list(args.fits)
        if not 1 <= len(fits) <= 2:
            raise ValueError("--fits takes one or two fit files")
        run_report(fits[0], fits[1] if len(fits) == 2 else None, args.out, args.format)
