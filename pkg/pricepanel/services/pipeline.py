"""
The panel-building program: cohort, time variables, event window, SUP
classification, monthly aggregation, base-month index, analysis table and
sample splits.

Joins and group-bys run in the scratch relational store; everything else is
plain Python over immutable records. Every result is ordered by
(prod_id, ret_id, month) so identical inputs give identical tables.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from decimal import Context, Decimal
from pathlib import Path
from typing import Iterable, Optional, Sequence

from sqlalchemy import and_, func, insert, select
from sqlalchemy.orm import aliased

from ..db import scratch_session
from ..errors import PipelineError
from ..models import Click, ClickCell, IndexedCell, Offer, PriceCell, RetailerSnapshot
from ..schemas import (
    OBS_COLUMNS,
    PRICE_DECIMALS,
    AnalysisRow,
    ClickRecord,
    IndexedObservation,
    MonthlyClicks,
    OfferRecord,
    PanelCell,
    PanelDiagnostics,
    ProductRecord,
    RetailerRecord,
    SupPatternSet,
    TimedRow,
)
from .ingest import retailer_snapshot
from .patterns import STRICT_CONTROL_PATTERN, CompiledPatternSet, classify_sup, ilike
from .timevars import (
    BASE_MONTH,
    COHORT_TS,
    WINDOW_HI,
    WINDOW_LO,
    YearMonth,
    assign_bin,
    months_between,
    unix_to_month,
    unix_to_week,
)

logger = logging.getLogger(__name__)

PRICE_SCALE = 10**PRICE_DECIMALS
# fixed context so results never depend on the caller's decimal settings
DECIMAL_CTX = Context(prec=28)
HUNDRED = Decimal(100)


@dataclass(frozen=True)
class PanelSettings:
    base_month: YearMonth = BASE_MONTH
    window_lo: int = WINDOW_LO
    window_hi: int = WINDOW_HI
    cohort_ts: int = COHORT_TS


@dataclass
class IndexStats:
    pairs: int = 0
    pairs_without_base: int = 0
    pairs_with_zero_base: int = 0


@dataclass
class SampleSplit:
    treated: list[AnalysisRow]
    control: list[AnalysisRow]
    strict: list[AnalysisRow]
    sup_ids: set[str] = field(default_factory=set)
    control_ids: set[str] = field(default_factory=set)
    strict_ids: set[str] = field(default_factory=set)
    categories: dict[str, str] = field(default_factory=dict)

    def by_category(self) -> dict[str, list[AnalysisRow]]:
        """Treated rows per SUP category, categories in name order."""
        samples: dict[str, list[AnalysisRow]] = {}
        for row in self.treated:
            samples.setdefault(self.categories[row.prod_id], []).append(row)
        return dict(sorted(samples.items()))


@dataclass
class PanelResult:
    obs: list[AnalysisRow]
    split: SampleSplit
    diagnostics: PanelDiagnostics


def filter_cohort(products: Iterable[ProductRecord], cohort_ts: int = COHORT_TS) -> list[ProductRecord]:
    """Products born strictly after the cohort cutoff."""
    return [p for p in products if p.born_ts > cohort_ts]


def attach_time(rows: Iterable[OfferRecord | ClickRecord], base_month: YearMonth = BASE_MONTH) -> list[TimedRow]:
    timed = []
    for row in rows:
        month = unix_to_month(row.ts)
        timed.append(
            TimedRow(
                prod_id=row.prod_id,
                ret_id=row.ret_id,
                ts=row.ts,
                month=month,
                week=unix_to_week(row.ts),
                e=months_between(month, base_month),
                price=getattr(row, "price", None),
                clicks=getattr(row, "clicks", None),
                offer_id=getattr(row, "offer_id", None),
            )
        )
    return timed


def apply_event_window(
    rows: Iterable[TimedRow], cohort_ids: set[str], lo: int = WINDOW_LO, hi: int = WINDOW_HI
) -> list[TimedRow]:
    return [r for r in rows if lo <= r.e <= hi and r.prod_id in cohort_ids]


def _load_offers(session, offers: Sequence[TimedRow]) -> None:
    if offers:
        session.execute(
            insert(Offer),
            [
                {
                    "offer_id": r.offer_id,
                    "prod_id": r.prod_id,
                    "ret_id": r.ret_id,
                    "ts": r.ts,
                    "price_units": int(r.price.scaleb(PRICE_DECIMALS)),
                    "month_key": r.month.key,
                    "e": r.e,
                }
                for r in offers
            ],
        )


def _load_clicks(session, clicks: Sequence[TimedRow]) -> None:
    if clicks:
        session.execute(
            insert(Click),
            [
                {
                    "prod_id": r.prod_id,
                    "ret_id": r.ret_id,
                    "ts": r.ts,
                    "clicks": r.clicks,
                    "month_key": r.month.key,
                    "e": r.e,
                }
                for r in clicks
            ],
        )


def _click_sums():
    return (
        select(Click.prod_id, Click.ret_id, Click.month_key, func.sum(Click.clicks).label("clk"))
        .group_by(Click.prod_id, Click.ret_id, Click.month_key)
    )


def aggregate_clicks(clicks: Sequence[TimedRow]) -> list[MonthlyClicks]:
    """Sum of clicks per (prod_id, ret_id, month)."""
    if not clicks:
        return []
    with scratch_session() as session:
        _load_clicks(session, clicks)
        q = _click_sums().subquery()
        stmt = select(q.c.prod_id, q.c.ret_id, q.c.month_key, q.c.clk).order_by(
            q.c.prod_id, q.c.ret_id, q.c.month_key
        )
        return [
            MonthlyClicks(prod_id=p, ret_id=r, month=YearMonth.from_key(m), clk=clk)
            for p, r, m, clk in session.execute(stmt)
        ]


def aggregate_monthly(
    offers: Sequence[TimedRow], clicks: Sequence[TimedRow], settings: PanelSettings = PanelSettings()
) -> list[PanelCell]:
    """
    One cell per (prod_id, ret_id, month) with offers: mean offer price and
    summed clicks. `clk` is absent when the cell has no click rows.
    """
    if not offers:
        return []
    with scratch_session() as session:
        _load_offers(session, offers)
        _load_clicks(session, clicks)
        prices = (
            select(
                Offer.prod_id,
                Offer.ret_id,
                Offer.month_key,
                func.sum(Offer.price_units).label("units"),
                func.count().label("n"),
            )
            .group_by(Offer.prod_id, Offer.ret_id, Offer.month_key)
            .subquery()
        )
        sums = _click_sums().subquery()
        stmt = (
            select(prices.c.prod_id, prices.c.ret_id, prices.c.month_key, prices.c.units, prices.c.n, sums.c.clk)
            .select_from(
                prices.outerjoin(
                    sums,
                    and_(
                        prices.c.prod_id == sums.c.prod_id,
                        prices.c.ret_id == sums.c.ret_id,
                        prices.c.month_key == sums.c.month_key,
                    ),
                )
            )
            .order_by(prices.c.prod_id, prices.c.ret_id, prices.c.month_key)
        )
        cells = []
        for prod_id, ret_id, month_key, units, n, clk in session.execute(stmt):
            month = YearMonth.from_key(month_key)
            e = months_between(month, settings.base_month)
            cells.append(
                PanelCell(
                    prod_id=prod_id,
                    ret_id=ret_id,
                    month=month,
                    mean_price=DECIMAL_CTX.divide(Decimal(units), Decimal(n * PRICE_SCALE)),
                    clk=clk,
                    e=e,
                    bin=assign_bin(e, settings.window_lo, settings.window_hi),
                )
            )
    return cells


def build_index(
    cells: Sequence[PanelCell], settings: PanelSettings = PanelSettings()
) -> tuple[list[IndexedObservation], IndexStats]:
    """
    Level index P = 100 * mean_price / base_price, the base being the pair's
    cell in the base month. Pairs without a base cell, or with a zero base
    price, keep their cells with P absent.
    """
    stats = IndexStats()
    if not cells:
        return [], stats
    clk_by_key = {(c.prod_id, c.ret_id, c.month.key): c.clk for c in cells}
    with scratch_session() as session:
        session.execute(
            insert(PriceCell),
            [
                {
                    "prod_id": c.prod_id,
                    "ret_id": c.ret_id,
                    "month_key": c.month.key,
                    "e": c.e,
                    "bin": c.bin,
                    "mean_price": c.mean_price,
                }
                for c in cells
            ],
        )
        base = aliased(PriceCell, name="base")
        base_q = (
            select(base.prod_id, base.ret_id, base.mean_price.label("base_price"))
            .where(base.month_key == settings.base_month.key)
            .subquery()
        )
        stmt = (
            select(
                PriceCell.prod_id,
                PriceCell.ret_id,
                PriceCell.month_key,
                PriceCell.e,
                PriceCell.bin,
                PriceCell.mean_price,
                base_q.c.base_price,
            )
            .select_from(PriceCell)
            .outerjoin(base_q, and_(PriceCell.prod_id == base_q.c.prod_id, PriceCell.ret_id == base_q.c.ret_id))
            .order_by(PriceCell.prod_id, PriceCell.ret_id, PriceCell.month_key)
        )
        indexed = []
        pairs_without_base: set[tuple[str, str]] = set()
        pairs_with_zero_base: set[tuple[str, str]] = set()
        pairs: set[tuple[str, str]] = set()
        for cell in session.execute(stmt):
            base_price = cell.base_price
            pair = (cell.prod_id, cell.ret_id)
            pairs.add(pair)
            level: Optional[Decimal] = None
            log_level: Optional[float] = None
            if base_price is None:
                pairs_without_base.add(pair)
            elif base_price == 0:
                pairs_with_zero_base.add(pair)
            else:
                level = DECIMAL_CTX.divide(DECIMAL_CTX.multiply(HUNDRED, cell.mean_price), base_price)
                if level > 0:
                    log_level = float(level.ln(DECIMAL_CTX))
            indexed.append(
                IndexedObservation(
                    prod_id=cell.prod_id,
                    ret_id=cell.ret_id,
                    month=YearMonth.from_key(cell.month_key),
                    mean_price=cell.mean_price,
                    clk=clk_by_key.get((cell.prod_id, cell.ret_id, cell.month_key)),
                    e=cell.e,
                    bin=cell.bin,
                    base_price=base_price,
                    P=level,
                    logP=log_level,
                )
            )
    stats.pairs = len(pairs)
    stats.pairs_without_base = len(pairs_without_base)
    stats.pairs_with_zero_base = len(pairs_with_zero_base)
    if stats.pairs_with_zero_base:
        logger.warning("%d pairs have a zero base price; their index is left absent", stats.pairs_with_zero_base)
    return indexed, stats


def assemble_obs(
    indexed: Sequence[IndexedObservation],
    clicks_monthly: Sequence[MonthlyClicks],
    snapshot: Sequence[RetailerRecord],
) -> list[AnalysisRow]:
    """Analysis table: index rows left-joined with monthly clicks and the retailer snapshot."""
    if not indexed:
        return []
    with scratch_session() as session:
        session.execute(
            insert(IndexedCell),
            [
                {
                    "prod_id": r.prod_id,
                    "ret_id": r.ret_id,
                    "month_key": r.month.key,
                    "e": r.e,
                    "bin": r.bin,
                    "mean_price": r.mean_price,
                    "base_price": r.base_price,
                    "index_level": r.P,
                    "log_index": r.logP,
                }
                for r in indexed
            ],
        )
        if clicks_monthly:
            session.execute(
                insert(ClickCell),
                [{"prod_id": c.prod_id, "ret_id": c.ret_id, "month_key": c.month.key, "clicks": c.clk} for c in clicks_monthly],
            )
        if snapshot:
            session.execute(insert(RetailerSnapshot), [{"ret_id": s.ret_id, "ret_name": s.ret_name} for s in snapshot])
        stmt = (
            select(
                IndexedCell.prod_id,
                IndexedCell.ret_id,
                IndexedCell.month_key,
                IndexedCell.e,
                IndexedCell.bin,
                IndexedCell.index_level,
                IndexedCell.log_index,
                ClickCell.clicks,
                RetailerSnapshot.ret_name,
            )
            .select_from(IndexedCell)
            .outerjoin(
                ClickCell,
                and_(
                    IndexedCell.prod_id == ClickCell.prod_id,
                    IndexedCell.ret_id == ClickCell.ret_id,
                    IndexedCell.month_key == ClickCell.month_key,
                ),
            )
            .outerjoin(RetailerSnapshot, IndexedCell.ret_id == RetailerSnapshot.ret_id)
            .order_by(IndexedCell.prod_id, IndexedCell.ret_id, IndexedCell.month_key)
        )
        return [
            AnalysisRow(
                prod_id=cell.prod_id,
                ret_id=cell.ret_id,
                ret_name=cell.ret_name,
                month=YearMonth.from_key(cell.month_key),
                e=cell.e,
                b=cell.bin,
                P=float(cell.index_level) if cell.index_level is not None else None,
                logP=cell.log_index,
                clk=cell.clicks,
            )
            for cell in session.execute(stmt)
        ]


def split_samples(
    obs: Sequence[AnalysisRow],
    products: Iterable[ProductRecord],
    patterns: SupPatternSet | CompiledPatternSet,
    cohort_ts: int = COHORT_TS,
) -> SampleSplit:
    """
    Treated rows belong to SUP cohort products, control rows to the rest of
    the cohort, strict rows to controls named like a graphics card.
    """
    if isinstance(patterns, SupPatternSet):
        patterns = CompiledPatternSet.from_set(patterns)
    sup_ids: set[str] = set()
    control_ids: set[str] = set()
    strict_ids: set[str] = set()
    categories: dict[str, str] = {}
    for product in filter_cohort(products, cohort_ts):
        is_sup, category = classify_sup(product.name, patterns)
        if is_sup:
            sup_ids.add(product.prod_id)
            categories[product.prod_id] = category
        else:
            control_ids.add(product.prod_id)
            if ilike(product.name, STRICT_CONTROL_PATTERN):
                strict_ids.add(product.prod_id)
    return SampleSplit(
        treated=[r for r in obs if r.prod_id in sup_ids],
        control=[r for r in obs if r.prod_id in control_ids],
        strict=[r for r in obs if r.prod_id in strict_ids],
        sup_ids=sup_ids,
        control_ids=control_ids,
        strict_ids=strict_ids,
        categories=categories,
    )


def build_panel(
    products: Sequence[ProductRecord],
    offers: Sequence[OfferRecord],
    clicks: Sequence[ClickRecord],
    retailers: Sequence[RetailerRecord],
    patterns: SupPatternSet | CompiledPatternSet,
    settings: PanelSettings = PanelSettings(),
) -> PanelResult:
    """Run the whole panel-building program on ingested relations."""
    if settings.window_lo > 0 or settings.window_hi < 0:
        raise PipelineError(f"window [{settings.window_lo}, {settings.window_hi}] must contain the base month")
    if isinstance(patterns, SupPatternSet):
        patterns = CompiledPatternSet.from_set(patterns)
    diag = PanelDiagnostics()

    cohort = filter_cohort(products, settings.cohort_ts)
    cohort_ids = {p.prod_id for p in cohort}
    diag.cohort_size = len(cohort)

    offers_t = attach_time(offers, settings.base_month)
    clicks_t = attach_time(clicks, settings.base_month)
    offers_w = apply_event_window(offers_t, cohort_ids, settings.window_lo, settings.window_hi)
    clicks_w = apply_event_window(clicks_t, cohort_ids, settings.window_lo, settings.window_hi)
    diag.offers_in_window = len(offers_w)
    diag.clicks_in_window = len(clicks_w)
    diag.offers_out_of_window = len(offers_t) - len(offers_w)
    diag.clicks_out_of_window = len(clicks_t) - len(clicks_w)

    cells = aggregate_monthly(offers_w, clicks_w, settings)
    diag.cells = len(cells)
    indexed, stats = build_index(cells, settings)
    diag.pairs = stats.pairs
    diag.pairs_without_base = stats.pairs_without_base
    diag.pairs_with_zero_base = stats.pairs_with_zero_base

    obs = assemble_obs(indexed, aggregate_clicks(clicks_w), retailer_snapshot(tuple(retailers)))
    diag.obs_rows = len(obs)

    split = split_samples(obs, products, patterns, settings.cohort_ts)
    diag.sup_products = len(split.sup_ids)
    diag.control_products = len(split.control_ids)
    diag.strict_products = len(split.strict_ids)
    by_category: dict[str, int] = {}
    for category in split.categories.values():
        by_category[category] = by_category.get(category, 0) + 1
    diag.sup_by_category = dict(sorted(by_category.items()))

    logger.info(
        "Panel: %d cohort products (%d SUP, %d control, %d strict), %d cells, %d pairs without base",
        diag.cohort_size, diag.sup_products, diag.control_products, diag.strict_products,
        diag.cells, diag.pairs_without_base,
    )
    return PanelResult(obs=obs, split=split, diagnostics=diag)


# --- Analysis table files ---

def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_obs(path: str | Path, rows: Iterable[AnalysisRow]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(OBS_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(getattr(row, c)) for c in OBS_COLUMNS])


def read_obs(path: str | Path) -> list[AnalysisRow]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"panel file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != OBS_COLUMNS:
            raise PipelineError(f"{path}: columns {reader.fieldnames} do not match {','.join(OBS_COLUMNS)}")
        rows = []
        for rec in reader:
            rows.append(
                AnalysisRow(
                    prod_id=rec["prod_id"],
                    ret_id=rec["ret_id"],
                    ret_name=rec["ret_name"] or None,
                    month=YearMonth.parse(rec["month"]),
                    e=int(rec["e"]),
                    b=int(rec["b"]),
                    P=float(rec["P"]) if rec["P"] else None,
                    logP=float(rec["logP"]) if rec["logP"] else None,
                    clk=int(rec["clk"]) if rec["clk"] else None,
                )
            )
    return rows
