"""`did`: windowed DiD summaries from one or two fits."""
from __future__ import annotations

import argparse
from pathlib import Path
from typing import Optional, Sequence

from ..schemas import DidSection, DiDSummary
from ..services.summaries import did_all, parse_window_spec
from . import load_fit, stage, write_json

STAGE = "did"


def run_did(
    fit_treated: str | Path,
    fit_control: Optional[str | Path],
    out: str | Path,
    section: DidSection = DidSection(),
) -> list[DiDSummary]:
    fit_t = load_fit(fit_treated)
    fit_c = load_fit(fit_control) if fit_control else None
    windows = [parse_window_spec(w) for w in section.windows]
    summaries = did_all(fit_t, fit_c, windows, section.dof_rule, section.strict)
    write_json(out, {"summaries": [s.model_dump(mode="json") for s in summaries]})
    return summaries


def split_list(text: str) -> Sequence[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def add_parser(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser(STAGE, help="windowed difference-in-differences summaries")
    p.add_argument("--fit-treated", required=True)
    p.add_argument("--fit-control")
    p.add_argument("--windows", default="6,12,full")
    p.add_argument("--dof-rule", choices=["treated", "min"], default="treated")
    p.add_argument("--strict", action="store_true", help="fail when a window bin is missing from a fit")
    p.add_argument("--out", required=True, help="did.json path")
    p.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> None:
    with stage(STAGE):
        section = DidSection(windows=split_list(args.windows), dof_rule=args.dof_rule, strict=args.strict)
        run_did(args.fit_treated, args.fit_control, args.out, section)
