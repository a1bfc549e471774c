"""`fit`: estimate the event study on one sample file."""
from __future__ import annotations

import argparse
from pathlib import Path
from typing import Optional

from ..schemas import EventStudyFit, FitSection
from ..services.estimator import RegressionSample, fit_event_study
from ..services.pipeline import read_obs
from . import stage, write_json

STAGE = "fit"
CLUSTERING = "prod,ret"


def group_name(panel: str | Path) -> str:
    """obs_treated.csv -> treated"""
    return Path(panel).stem.removeprefix("obs_") or "sample"


def run_fit(
    panel: str | Path, out: str | Path, section: FitSection = FitSection(), group: Optional[str] = None
) -> EventStudyFit:
    rows = read_obs(panel)
    sample = RegressionSample.from_rows(
        rows, section.outcome, section.ref_bin, group or group_name(panel), section.retailer_key
    )
    fit = fit_event_study(sample, section.tol, section.max_iter, section.ssc, section.rmse_denominator)
    write_json(out, fit)
    return fit


def add_parser(sub: argparse._SubParsersAction) -> None:
    defaults = FitSection()
    p = sub.add_parser(STAGE, help="fit the event-study regression")
    p.add_argument("--panel", required=True, help="analysis table (e.g. obs_treated.csv)")
    p.add_argument("--outcome", choices=["P", "logP"], default=defaults.outcome)
    p.add_argument("--ref-bin", type=int, default=defaults.ref_bin)
    p.add_argument("--cluster", default=CLUSTERING, help="clustering dimensions (only prod,ret)")
    p.add_argument(
        "--retailer-key",
        choices=["ret_name", "ret_id"],
        default=defaults.retailer_key,
        help="retailer fixed-effect and cluster key (ret_name falls back to ret_id when absent)",
    )
    p.add_argument("--ssc", choices=["standard", "none"], default=defaults.ssc)
    p.add_argument("--rmse-denominator", choices=["n", "dof"], default=defaults.rmse_denominator)
    p.add_argument("--tol", type=float, default=defaults.tol)
    p.add_argument("--max-iter", type=int, default=defaults.max_iter)
    p.add_argument("--group", help="label stored in the fit (default: from the file name)")
    p.add_argument("--out", required=True, help="fit.json path")
    p.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> None:
    with stage(STAGE):
        if args.cluster.replace(" ", "") != CLUSTERING:
            raise ValueError(f"unsupported clustering {args.cluster!r}; only {CLUSTERING}")
        section = FitSection(
            outcome=args.outcome,
            ref_bin=args.ref_bin,
            retailer_key=args.retailer_key,
            ssc=args.ssc,
            rmse_denominator=args.rmse_denominator,
            tol=args.tol,
            max_iter=args.max_iter,
        )
        run_fit(args.panel, args.out, section, args.group)
