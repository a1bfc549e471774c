"""`build-panel`: run the panel-building program on an ingested directory."""
from __future__ import annotations

import argparse
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from ..services.ingest import TABLE_COLUMNS, load_tables
from ..services.patterns import load_patterns
from ..services.pipeline import PanelResult, PanelSettings, build_panel, write_obs
from ..services.timevars import BASE_MONTH, WINDOW_HI, WINDOW_LO, YearMonth, parse_window
from . import stage, write_json

STAGE = "build-panel"
SPLIT_FILES = {"treated": "obs_treated.csv", "control": "obs_control.csv", "strict": "obs_strict.csv"}


@dataclass(frozen=True)
class PanelOutput:
    panel: PanelResult
    paths: dict[str, Path]
    # SUP category -> its treated sample file
    categories: dict[str, Path] = field(default_factory=dict)


def category_slug(category: str) -> str:
    """File-name form of a category: `Films & wraps` -> `films_wraps`."""
    slug = re.sub(r"[^0-9a-z]+", "_", category.lower()).strip("_")
    if not slug:
        raise ValueError(f"category {category!r} has no usable file name")
    return slug


def run_build_panel(
    in_dir: str | Path,
    out_dir: str | Path,
    patterns: Optional[str | Path] = None,
    base_month: str = str(BASE_MONTH),
    window: str = f"{WINDOW_LO}:{WINDOW_HI}",
) -> PanelOutput:
    in_dir, out_dir = Path(in_dir), Path(out_dir)
    pattern_set = load_patterns(patterns)
    lo, hi = parse_window(window)
    settings = PanelSettings(base_month=YearMonth.parse(base_month), window_lo=lo, window_hi=hi)
    tables = load_tables({kind: in_dir / f"{kind}.csv" for kind in TABLE_COLUMNS})
    panel = build_panel(
        tables["products"].rows,
        tables["offers"].rows,
        tables["clicks"].rows,
        tables["retailers"].rows,
        pattern_set,
        settings,
    )

    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {"obs": out_dir / "obs.csv"}
    write_obs(paths["obs"], panel.obs)
    for name, filename in SPLIT_FILES.items():
        paths[name] = out_dir / filename
        write_obs(paths[name], getattr(panel.split, name))
    categories: dict[str, Path] = {}
    for category, rows in panel.split.by_category().items():
        name = f"treated_{category_slug(category)}"
        if name in paths:
            raise ValueError(f"category {category!r} clashes with another sample file ({name})")
        paths[name] = categories[category] = out_dir / f"obs_{name}.csv"
        write_obs(paths[name], rows)
    paths["diagnostics"] = write_json(out_dir / "diagnostics.json", panel.diagnostics)
    return PanelOutput(panel=panel, paths=paths, categories=categories)


def add_parser(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser(STAGE, help="build the analysis table and sample splits")
    p.add_argument("--in", dest="in_dir", required=True, help="directory written by ingest")
    p.add_argument("--patterns", help="SUP pattern file (default: packaged set)")
    p.add_argument("--base-month", default=str(BASE_MONTH))
    p.add_argument("--window", default=f"{WINDOW_LO}:{WINDOW_HI}", help="event window LO:HI in months")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> None:
    with stage(STAGE):
        run_build_panel(args.in_dir, args.out, args.patterns, args.base_month, args.window)
