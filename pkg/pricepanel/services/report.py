"""
Event-study tables: one row per bin with Est./SE/t/p for each group side by
side, star-annotated estimates, and a fit-statistics footer.

Rendered as LaTeX (jinja2 template) or as a long-format CSV that
`parse_table_csv` reads back.
"""
from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass
from typing import Literal, Optional, Sequence

from jinja2 import Environment, FileSystemLoader, StrictUndefined

from ..schemas import EventStudyFit, StarScheme
from .summaries import DEFAULT_STARS, format_two, stars
from .tdist import t_pvalue

TableFormat = Literal["latex", "csv"]

BASE_DIR = os.path.dirname(os.path.dirname(__file__))
templates_path = os.path.join(BASE_DIR, "templates")

env = Environment(
    loader=FileSystemLoader(templates_path),
    variable_start_string="<<",
    variable_end_string=">>",
    undefined=StrictUndefined,
    keep_trailing_newline=True,
    autoescape=False,
)

CSV_COLUMNS = ["row", "group", "est", "stars", "se", "t", "p"]
FOOTER_ROWS = ["Observations", "RMSE", "Adj. R2", "Within R2"]
LATEX_FOOTER_LABELS = {"Adj. R2": r"Adj. R$^2$", "Within R2": r"Within R$^2$"}


@dataclass(frozen=True)
class BinCell:
    est: str = ""
    stars: str = ""
    se: str = ""
    t: str = ""
    p: str = ""


def bin_cell(fit: EventStudyFit, b: int, scheme: StarScheme = DEFAULT_STARS) -> BinCell:
    """Formatted Est./SE/t/p of one bin; empty when the fit does not estimate it."""
    if b not in fit.bins:
        return BinCell()
    est = fit.coef(b)
    se = fit.std_error(b)
    if se is None or fit.dof_inference < 1:
        return BinCell(est=format_two(est), se=format_two(se))
    test = t_pvalue(est, se, fit.dof_inference)
    return BinCell(
        est=format_two(est),
        stars=stars(test.p, scheme),
        se=format_two(se),
        t=format_two(test.t),
        p=format_two(test.p),
    )


def footer_values(fit: EventStudyFit) -> dict[str, str]:
    return {
        "Observations": str(fit.n_obs),
        "RMSE": format_two(fit.rmse),
        "Adj. R2": format_two(fit.adj_r2),
        "Within R2": format_two(fit.within_r2),
    }


def _fits(fit_t: EventStudyFit, fit_c: Optional[EventStudyFit]) -> list[tuple[str, EventStudyFit]]:
    blocks = [("Treated", fit_t)]
    if fit_c is not None:
        blocks.append(("Control", fit_c))
    return blocks


def _row_bins(fits: Sequence[EventStudyFit]) -> list[int]:
    return sorted({b for fit in fits for b in fit.bins})


def render_csv(fit_t: EventStudyFit, fit_c: Optional[EventStudyFit] = None, scheme: StarScheme = DEFAULT_STARS) -> str:
    blocks = _fits(fit_t, fit_c)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for b in _row_bins([f for _, f in blocks]):
        for title, fit in blocks:
            cell = bin_cell(fit, b, scheme)
            writer.writerow([b, title, cell.est, cell.stars, cell.se, cell.t, cell.p])
    for label in FOOTER_ROWS:
        for title, fit in blocks:
            writer.writerow([label, title, footer_values(fit)[label], "", "", "", ""])
    return buf.getvalue()


def _latex_int(value: str) -> str:
    """Thousands separators the way the tables print them: 1{,}443."""
    return f"{int(value):,}".replace(",", "{,}")


def render_latex(fit_t: EventStudyFit, fit_c: Optional[EventStudyFit] = None, scheme: StarScheme = DEFAULT_STARS) -> str:
    blocks = _fits(fit_t, fit_c)
    rows = []
    for b in _row_bins([f for _, f in blocks]):
        cells = []
        for _, fit in blocks:
            cell = bin_cell(fit, b, scheme)
            cells.append({"est": cell.est + cell.stars, "se": cell.se, "t": cell.t, "p": cell.p})
        rows.append({"label": str(b), "cells": cells})
    footer = []
    for label in FOOTER_ROWS:
        values = [footer_values(fit)[label] for _, fit in blocks]
        if label == "Observations":
            values = [_latex_int(v) for v in values]
        footer.append({"label": LATEX_FOOTER_LABELS.get(label, label), "cells": values})
    template = env.get_template("event_study_table.tex.j2")
    return template.render(blocks=[{"title": title} for title, _ in blocks], rows=rows, footer=footer)


def render_table(
    fit_t: EventStudyFit,
    fit_c: Optional[EventStudyFit] = None,
    fmt: TableFormat = "latex",
    scheme: StarScheme = DEFAULT_STARS,
) -> str:
    if fmt == "csv":
        return render_csv(fit_t, fit_c, scheme)
    if fmt == "latex":
        return render_latex(fit_t, fit_c, scheme)
    raise ValueError(f"unknown table format {fmt!r}")


def _number(text: str) -> Optional[float]:
    return float(text) if text != "" else None


def parse_table_csv(text: str) -> dict[tuple[str, str], dict[str, object]]:
    """
    Read a table rendered by `render_csv` back into values, keyed by
    (row label, group). Numbers come back at displayed precision.
    """
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames != CSV_COLUMNS:
        raise ValueError(f"columns {reader.fieldnames} do not match {','.join(CSV_COLUMNS)}")
    parsed: dict[tuple[str, str], dict[str, object]] = {}
    for rec in reader:
        key = (rec["row"], rec["group"])
        if rec["row"] == "Observations":
            parsed[key] = {"est": int(rec["est"])}
        else:
            parsed[key] = {
                "est": _number(rec["est"]),
                "stars": rec["stars"],
                "se": _number(rec["se"]),
                "t": _number(rec["t"]),
                "p": _number(rec["p"]),
            }
    return parsed
