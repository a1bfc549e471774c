"""`plot-data`: per-bin confidence-interval series for plotting."""
from __future__ import annotations

import argparse
from pathlib import Path
from typing import Sequence

from ..schemas import PlotSeries
from ..services.summaries import export_plot_data, write_plot_csv
from . import load_fit, stage
from .did import split_list

STAGE = "plot-data"


def run_plot_data(fits: Sequence[str | Path], out: str | Path, level: float = 0.90) -> list[PlotSeries]:
    series = [export_plot_data(load_fit(f), level) for f in fits]
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    write_plot_csv(out, series)
    return series


def add_parser(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser(STAGE, help="export CI series (bin,group,estimate,lo90,hi90)")
    p.add_argument("--fit", required=True, help="fit.json, or several separated by commas")
    p.add_argument("--level", type=float, default=0.90)
    p.add_argument("--out", required=True, help="series.csv path")
    p.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> None:
    with stage(STAGE):
        if not 0 < args.level < 1:
            raise ValueError(f"level must lie in (0, 1), got {args.level}")
        run_plot_data(split_list(args.fit), args.out, args.level)
