"""`ingest`: validate the four raw relations and write them back normalized, with rejects."""
from __future__ import annotations

import argparse
import logging
from dataclasses import dataclass
from pathlib import Path

from ..services.ingest import TABLE_COLUMNS, LoadedTable, check_references, load_tables, write_rejects, write_table
from . import stage

logger = logging.getLogger(__name__)

STAGE = "ingest"


@dataclass(frozen=True)
class IngestOutput:
    tables: dict[str, LoadedTable]
    paths: dict[str, Path]
    rejects: Path


def run_ingest(paths: dict[str, str | Path], out_dir: str | Path, strict_refs: bool = False) -> IngestOutput:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tables = load_tables(paths)
    offers, clicks, ref_rejects = check_references(
        tables["products"].rows,
        tables["offers"].rows,
        tables["clicks"].rows,
        tables["retailers"].rows,
        strict_refs,
        lines={kind: tables[kind].lines for kind in ("offers", "clicks")},
    )
    tables["offers"] = LoadedTable("offers", offers, tables["offers"].rejects, tables["offers"].n_input)
    tables["clicks"] = LoadedTable("clicks", clicks, tables["clicks"].rejects, tables["clicks"].n_input)

    written = {}
    for kind in TABLE_COLUMNS:
        written[kind] = out_dir / f"{kind}.csv"
        write_table(written[kind], kind, tables[kind].rows)
    rejects = [r for kind in TABLE_COLUMNS for r in tables[kind].rejects] + ref_rejects
    rejects_path = out_dir / "rejects.csv"
    write_rejects(rejects_path, rejects)
    logger.info("Ingested %s; %d rejects", ", ".join(f"{len(tables[k].rows)} {k}" for k in TABLE_COLUMNS), len(rejects))
    return IngestOutput(tables=tables, paths=written, rejects=rejects_path)


def add_parser(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser(STAGE, help="validate raw relations and write rejects")
    for kind in TABLE_COLUMNS:
        p.add_argument(f"--{kind}", required=True, help=f"{kind} file (.csv or .jsonl)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--strict-refs", action="store_true", help="reject offers/clicks with unknown prod_id or ret_id")
    p.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> None:
    with stage(STAGE):
        run_ingest({kind: getattr(args, kind) for kind in TABLE_COLUMNS}, args.out, args.strict_refs)
