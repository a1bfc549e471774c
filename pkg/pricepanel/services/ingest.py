"""
Loading and validation of the four base relations.

Files are CSV with a header row, or JSON lines (`.jsonl`, `.ndjson`).
Malformed rows become rejects; header problems and duplicate products are fatal.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Mapping, Sequence, Type

from pydantic import BaseModel, ValidationError
from sqlalchemy import and_, func, insert, select

from ..db import scratch_session
from ..deps import ordered_map
from ..errors import DuplicateKeyError, HeaderMismatchError
from ..models import Retailer
from ..schemas import ClickRecord, OfferRecord, ProductRecord, Reject, RetailerRecord

logger = logging.getLogger(__name__)

TableKind = Literal["products", "offers", "clicks", "retailers"]

TABLE_COLUMNS: dict[str, list[str]] = {
    "products": ["prod_id", "name", "born_ts"],
    "offers": ["offer_id", "prod_id", "ret_id", "ts", "price"],
    "clicks": ["prod_id", "ret_id", "ts", "clicks"],
    "retailers": ["ret_id", "ret_name", "ts"],
}

TABLE_MODELS: dict[str, Type[BaseModel]] = {
    "products": ProductRecord,
    "offers": OfferRecord,
    "clicks": ClickRecord,
    "retailers": RetailerRecord,
}

JSONL_SUFFIXES = {".jsonl", ".ndjson"}
REJECT_COLUMNS = ["table", "line", "reason", "record"]

UTF8_BOM = b"\xef\xbb\xbf"
# bytes that are not valid UTF-8 decode to lone surrogates under surrogateescape
UNDECODABLE = re.compile("[\udc80-\udcff]")
INVALID_UTF8 = "invalid UTF-8"


@dataclass(frozen=True)
class LoadedTable:
    """Typed rows of one file; `lines[i]` is the source line of `rows[i]` when known."""

    kind: str
    rows: tuple
    rejects: list[Reject] = field(default_factory=list)
    n_input: int = 0
    lines: tuple[int, ...] = ()


def _reason(exc: ValidationError) -> str:
    """First validation error as a short reason; custom messages come through verbatim."""
    err = exc.errors()[0]
    ctx_error = err.get("ctx", {}).get("error")
    if ctx_error is not None:
        return str(ctx_error)
    loc = ".".join(str(part) for part in err.get("loc", ()))
    return f"{loc}: {err['msg']}" if loc else err["msg"]


def _printable(raw: str) -> str:
    """Raw record text with undecodable bytes shown as U+FFFD."""
    return raw.encode("utf-8", "surrogateescape").decode("utf-8", "replace")


def _iter_csv(text: str, kind: str, path: Path):
    reader = csv.reader(io.StringIO(text, newline=""))
    header = next(reader, None)
    expected = TABLE_COLUMNS[kind]
    if header is None or [h.strip() for h in header] != expected:
        raise HeaderMismatchError(
            f"{path}: header {header!r} does not match {kind} schema {','.join(expected)}"
        )
    lineno = reader.line_num + 1
    for values in reader:
        start, lineno = lineno, reader.line_num + 1
        if not values:
            continue
        raw = ",".join(values)
        if UNDECODABLE.search(raw):
            yield start, _printable(raw), None, INVALID_UTF8
            continue
        if len(values) != len(expected):
            yield start, raw, None, f"expected {len(expected)} fields, got {len(values)}"
            continue
        yield start, raw, dict(zip(expected, values)), None


def _iter_jsonl(text: str, kind: str):
    expected = set(TABLE_COLUMNS[kind])
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        if UNDECODABLE.search(line):
            yield lineno, _printable(line), None, INVALID_UTF8
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            yield lineno, line, None, f"invalid JSON: {exc.msg}"
            continue
        if not isinstance(obj, dict) or set(obj) != expected:
            yield lineno, line, None, "fields do not match schema"
            continue
        yield lineno, line, obj, None


def load_table(path: str | Path, kind: TableKind) -> LoadedTable:
    """Parse every data row of `path` into typed records, collecting rejects."""
    path = Path(path)
    if kind not in TABLE_MODELS:
        raise ValueError(f"unknown table kind {kind!r}")
    if not path.is_file():
        raise FileNotFoundError(f"{kind} file not found: {path}")

    data = path.read_bytes().removeprefix(UTF8_BOM)
    text = data.decode("utf-8", "surrogateescape")
    model = TABLE_MODELS[kind]
    source = _iter_jsonl(text, kind) if path.suffix.lower() in JSONL_SUFFIXES else _iter_csv(text, kind, path)

    rows: list[BaseModel] = []
    lines: list[int] = []
    rejects: list[Reject] = []
    n_input = 0
    for lineno, raw, values, problem in source:
        n_input += 1
        if problem is None:
            try:
                rows.append(model.model_validate(values))
                lines.append(lineno)
                continue
            except ValidationError as exc:
                problem = _reason(exc)
        rejects.append(Reject(table=kind, line=lineno, reason=problem, record=raw))

    if kind == "products":
        seen: set[str] = set()
        for row in rows:
            if row.prod_id in seen:
                raise DuplicateKeyError(f"{path}: duplicate prod_id {row.prod_id!r}")
            seen.add(row.prod_id)

    logger.info("Loaded %s: %d rows, %d rejects (%s)", kind, len(rows), len(rejects), path)
    return LoadedTable(kind=kind, rows=tuple(rows), rejects=rejects, n_input=n_input, lines=tuple(lines))


def load_tables(paths: dict[str, str | Path], threads: int | None = None) -> dict[str, LoadedTable]:
    """Load several tables, one file per worker."""
    kinds = sorted(paths)
    loaded = ordered_map(lambda kind: load_table(paths[kind], kind), kinds, threads)
    return dict(zip(kinds, loaded))


def check_references(
    products: tuple[ProductRecord, ...],
    offers: tuple[OfferRecord, ...],
    clicks: tuple[ClickRecord, ...],
    retailers: tuple[RetailerRecord, ...],
    strict: bool = False,
    lines: Mapping[str, Sequence[int]] | None = None,
) -> tuple[tuple[OfferRecord, ...], tuple[ClickRecord, ...], list[Reject]]:
    """
    Check that offers and clicks point at known products and retailers.

    By default unknown references are logged and kept; with `strict` they are
    routed to rejects. Retailer references are only checked when the retailer
    table is non-empty. `lines` maps "offers" and "clicks" to the source line
    of each row (`LoadedTable.lines`); without it rejects carry row positions.
    """
    prod_ids = {p.prod_id for p in products}
    ret_ids = {r.ret_id for r in retailers}
    rejects: list[Reject] = []

    def problem(row) -> str | None:
        if row.prod_id not in prod_ids:
            return "unknown prod_id"
        if ret_ids and row.ret_id not in ret_ids:
            return "unknown ret_id"
        return None

    kept: dict[str, list] = {"offers": [], "clicks": []}
    for kind, rows in (("offers", offers), ("clicks", clicks)):
        unknown = 0
        source_lines = (lines or {}).get(kind) or range(1, len(rows) + 1)
        if len(source_lines) != len(rows):
            raise ValueError(f"{kind}: {len(source_lines)} line numbers for {len(rows)} rows")
        for lineno, row in zip(source_lines, rows):
            reason = problem(row)
            if reason is None:
                kept[kind].append(row)
                continue
            unknown += 1
            if strict:
                rejects.append(Reject(table=kind, line=lineno, reason=reason, record=row.model_dump_json()))
            else:
                kept[kind].append(row)
        if unknown:
            action = "rejected" if strict else "kept"
            logger.warning("%d %s rows reference unknown products or retailers (%s)", unknown, kind, action)
    return tuple(kept["offers"]), tuple(kept["clicks"]), rejects


def retailer_snapshot(rows: tuple[RetailerRecord, ...] | list[RetailerRecord]) -> list[RetailerRecord]:
    """
    One row per retailer: its attributes at the latest timestamp.

    Ties at the latest timestamp go to the lexicographically smallest name, so
    the result does not depend on input order.
    """
    if not rows:
        return []
    with scratch_session() as session:
        session.execute(insert(Retailer), [r.model_dump() for r in rows])
        latest = (
            select(Retailer.ret_id, func.max(Retailer.ts).label("t_star"))
            .group_by(Retailer.ret_id)
            .subquery()
        )
        stmt = (
            select(Retailer.ret_id, Retailer.ret_name, Retailer.ts)
            .join(latest, and_(Retailer.ret_id == latest.c.ret_id, Retailer.ts == latest.c.t_star))
            .order_by(Retailer.ret_id, Retailer.ret_name)
        )
        snapshot: dict[str, RetailerRecord] = {}
        for ret_id, ret_name, ts in session.execute(stmt):
            snapshot.setdefault(ret_id, RetailerRecord(ret_id=ret_id, ret_name=ret_name, ts=ts))
    return list(snapshot.values())


def _format_value(value) -> str:
    if value is None:
        return ""
    return str(value)


def write_table(path: str | Path, kind: TableKind, rows) -> None:
    columns = TABLE_COLUMNS[kind]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_format_value(getattr(row, c)) for c in columns])


def write_rejects(path: str | Path, rejects: list[Reject]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REJECT_COLUMNS)
        for r in rejects:
            writer.writerow([r.table, r.line, r.reason, r.record])
