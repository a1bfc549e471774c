"""
`run-all`: every stage in order from one JSON config, then the run manifest.

Output layout under `out`:
    raw/        simulated relations (when the config has a `simulate` section)
    ingest/     normalized relations and rejects.csv
    panel/      obs.csv, obs_treated.csv, obs_control.csv, obs_strict.csv,
                obs_treated_<category>.csv, diagnostics.json
    fit_treated.json, fit_control.json, fit_strict.json (placebo, when estimable),
    fit_treated_<category>.json
    did.json, did_<category>.json, tables/, series.csv, manifest.json

Command-line flags override the matching config values.
"""
from __future__ import annotations

import argparse
import logging
import shutil
import sys
from pathlib import Path
from typing import Any, Optional

from .. import audit
from ..errors import EstimationError, SummaryError
from ..schemas import RunConfig
from ..services.ingest import TABLE_COLUMNS
from ..services.summaries import export_plot_data, write_plot_csv
from . import load_fit, stage
from .build_panel import category_slug, run_build_panel
from .did import run_did, split_list
from .fit import run_fit
from .ingest import run_ingest
from .report import run_report
from .simulate import run_simulate

logger = logging.getLogger(__name__)

STAGE = "run-all"
MIN_STRICT_CLUSTERS = 2

Overrides = dict[str, dict[str, Any]]


def load_run_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    return RunConfig.model_validate_json(path.read_text(encoding="utf-8"))


def merge_overrides(config: RunConfig, overrides: Optional[Overrides]) -> RunConfig:
    """Config with per-section values replaced; the result is validated again."""
    if not overrides:
        return config
    data = config.model_dump()
    for section, values in overrides.items():
        if values:
            data[section] = {**(data.get(section) or {}), **values}
    return RunConfig.model_validate(data)


def _resolve(base: Path, value: Optional[str]) -> Optional[Path]:
    if value is None:
        return None
    p = Path(value)
    return p if p.is_absolute() else base / p


def _optional_fit(panel: Path, out: Path, config: RunConfig, group: str) -> bool:
    try:
        run_fit(panel, out, config.fit, group)
    except EstimationError as exc:
        logger.warning("%s: fit skipped (%s)", group, exc)
        out.unlink(missing_ok=True)
        return False
    return True


def run_all(
    config_path: str | Path,
    out: Optional[str] = None,
    command: Optional[list[str]] = None,
    overrides: Optional[Overrides] = None,
) -> Path:
    """Run every stage; returns the manifest path. Raises StageError on the first failure."""
    with stage(STAGE):
        config_path = Path(config_path)
        config = merge_overrides(load_run_config(config_path), overrides)
    base = config_path.parent
    out_dir = Path(out) if out is not None else _resolve(base, config.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = out_dir / "manifest.json"
    manifest_path.unlink(missing_ok=True)
    manifest = audit.start(command or sys.argv, config)
    outputs: list[Path] = []

    raw_paths = {kind: _resolve(base, getattr(config.ingest, kind)) for kind in TABLE_COLUMNS}
    if config.simulate is not None:
        with stage("simulate"):
            raw_dir = out_dir / "raw"
            shutil.rmtree(raw_dir, ignore_errors=True)
            simulated = run_simulate(config.simulate, raw_dir)
            raw_paths = {kind: raw_paths[kind] or simulated[kind] for kind in TABLE_COLUMNS}
            outputs.extend(simulated.values())

    with stage("ingest"):
        absent = [kind for kind, p in raw_paths.items() if p is None]
        if absent:
            raise ValueError(f"no input file configured for {', '.join(absent)}")
        ingested = run_ingest(raw_paths, out_dir / "ingest", config.ingest.strict_refs)
        outputs.extend([*ingested.paths.values(), ingested.rejects])

    with stage("build-panel"):
        bp = config.build_panel
        panel_dir = out_dir / "panel"
        shutil.rmtree(panel_dir, ignore_errors=True)
        panel = run_build_panel(out_dir / "ingest", panel_dir, _resolve(base, bp.patterns), bp.base_month, bp.window)
        outputs.extend(panel.paths.values())

    fits: dict[str, Path] = {}
    category_fits: dict[str, Path] = {}
    with stage("fit"):
        for group in ("treated", "control"):
            if group == "control" and not panel.panel.split.control:
                logger.warning("Control sample is empty; reporting the treated fit alone")
                continue
            fits[group] = out_dir / f"fit_{group}.json"
            run_fit(panel.paths[group], fits[group], config.fit, group)

        strict_rows = panel.panel.split.strict
        n_strict_prod = len({r.prod_id for r in strict_rows})
        n_strict_ret = len({r.ret_id for r in strict_rows})
        if n_strict_prod >= MIN_STRICT_CLUSTERS and n_strict_ret >= MIN_STRICT_CLUSTERS:
            if _optional_fit(panel.paths["strict"], out_dir / "fit_strict.json", config, "strict"):
                fits["strict"] = out_dir / "fit_strict.json"
        else:
            logger.warning(
                "Strict control sample has %d products and %d retailers; placebo fit skipped",
                n_strict_prod, n_strict_ret,
            )

        for category, path in panel.categories.items():
            group = f"treated_{category_slug(category)}"
            if _optional_fit(path, out_dir / f"fit_{group}.json", config, group):
                category_fits[category] = out_dir / f"fit_{group}.json"
        outputs.extend([*fits.values(), *category_fits.values()])

    with stage("did"):
        outputs.append(out_dir / "did.json")
        run_did(fits["treated"], fits.get("control"), out_dir / "did.json", config.did)
        for category, fit_path in category_fits.items():
            did_path = out_dir / f"did_{category_slug(category)}.json"
            try:
                run_did(fit_path, fits.get("control"), did_path, config.did)
            except SummaryError as exc:
                logger.warning("%s: DiD summaries skipped (%s)", category, exc)
                did_path.unlink(missing_ok=True)
                continue
            outputs.append(did_path)

    with stage("report"):
        tables = out_dir / "tables"
        shutil.rmtree(tables, ignore_errors=True)
        fmt = config.report.format
        outputs.append(run_report(fits["treated"], fits.get("control"), tables, fmt))
        if "strict" in fits:
            outputs.append(run_report(fits["treated"], fits["strict"], tables, fmt, name="event_study_strict"))
        for category, fit_path in category_fits.items():
            name = f"event_study_{category_slug(category)}"
            outputs.append(run_report(fit_path, fits.get("control"), tables, fmt, name=name))

    with stage("plot-data"):
        series = []
        for path in [*fits.values(), *category_fits.values()]:
            fit = load_fit(path)
            if fit.vcov is None or fit.dof_inference < 1:
                logger.warning("%s: no covariance matrix for inference; left out of the plot data", fit.group)
                continue
            series.append(export_plot_data(fit, config.plot.level))
        series_path = out_dir / "series.csv"
        write_plot_csv(series_path, series, config.plot.level)
        outputs.append(series_path)

    manifest = audit.finish(manifest, [p for p in raw_paths.values() if p is not None], out_dir, outputs)
    audit.write(manifest_path, manifest)
    logger.info("Run finished; manifest at %s", manifest_path)
    return manifest_path


def add_parser(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser(STAGE, help="run every stage from a JSON config")
    p.add_argument("--config", required=True, help="RunConfig JSON")
    p.add_argument("--out", help="override the config's output directory")
    p.add_argument("--patterns", help="SUP pattern file")
    p.add_argument("--outcome", choices=["P", "logP"])
    p.add_argument("--retailer-key", choices=["ret_name", "ret_id"])
    p.add_argument("--ssc", choices=["standard", "none"])
    p.add_argument("--windows", help="comma-separated DiD windows, e.g. 6,12,full")
    p.add_argument("--dof-rule", choices=["treated", "min"])
    p.add_argument("--format", choices=["latex", "csv"])
    p.add_argument("--level", type=float, help="plot confidence level")
    p.set_defaults(handler=handle)


def overrides_from_args(args: argparse.Namespace) -> Overrides:
    """Config overrides for every flag that was given."""
    sections: Overrides = {
        "build_panel": {"patterns": str(Path(args.patterns).resolve()) if args.patterns else None},
        "fit": {"outcome": args.outcome, "retailer_key": args.retailer_key, "ssc": args.ssc},
        "did": {"windows": split_list(args.windows) if args.windows else None, "dof_rule": args.dof_rule},
        "report": {"format": args.format},
        "plot": {"level": args.level},
    }
    return {name: {k: v for k, v in values.items() if v is not None} for name, values in sections.items()}


def handle(args: argparse.Namespace) -> None:
    with stage(STAGE):
        overrides = overrides_from_args(args)
    run_all(args.config, args.out, overrides=overrides)
