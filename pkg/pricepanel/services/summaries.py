"""
Windowed difference-in-differences contrasts, significance stars and
confidence-interval series for plotting.
"""
from __future__ import annotations

import csv
import logging
from decimal import ROUND_HALF_EVEN, Decimal
from pathlib import Path
from typing import Iterable, Literal, Optional, Sequence

import numpy as np

from ..errors import SummaryError
from ..schemas import DiDSummary, EventStudyFit, PlotPoint, PlotSeries, StarScheme
from .tdist import t_pvalue, t_quantile
from .timevars import BIN_WIDTH, window_bins

logger = logging.getLogger(__name__)

TWO = Decimal("0.01")
DEFAULT_STARS = StarScheme()
DofRule = Literal["treated", "min"]


def _round_two(x: float) -> Decimal:
    return Decimal(repr(float(x))).quantize(TWO, rounding=ROUND_HALF_EVEN)


def format_two(x: Optional[float]) -> str:
    """Fixed two-decimal rendering, round half to even. None renders empty."""
    if x is None:
        return ""
    text = str(_round_two(x))
    return "0.00" if text == "-0.00" else text


def stars(p: Optional[float], scheme: StarScheme = DEFAULT_STARS) -> str:
    """Label of the first threshold strictly above p; empty when none is."""
    if p is None:
        return ""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p-value {p} outside [0, 1]")
    for cut, label in scheme.thresholds:
        if p < cut:
            return label
    return ""


def parse_window_spec(text: str) -> Optional[int]:
    """`6`, `6m`, `12`, `full` -> months (None for full)."""
    token = text.strip().lower().removesuffix("m")
    if token == "full":
        return None
    try:
        w = int(token)
    except ValueError as exc:
        raise SummaryError(f"invalid window {text!r}") from exc
    if w <= 0 or w % BIN_WIDTH:
        raise SummaryError(f"window {text!r} must be a positive multiple of {BIN_WIDTH} months")
    return w


def window_label(w: Optional[int]) -> str:
    return "full" if w is None else f"{w}m"


def window_sides(w: Optional[int]) -> tuple[list[int], list[int]]:
    """(pre bins, post bins) of a window; `None` is the full contrast."""
    if w is None:
        bins = window_bins()
        return [b for b in bins if b < 0], [b for b in bins if b > 0]
    return list(range(-w, 0, BIN_WIDTH)), list(range(BIN_WIDTH, w + 1, BIN_WIDTH))


def contrast_vector(fit: EventStudyFit, w: Optional[int], strict: bool = False) -> tuple[dict[int, float], list[int]]:
    """
    Averaging contrast over the bins of each window side: post weights sum
    to +1, pre weights to -1. Bins the fit lacks are left out and the rest
    reweighted (or, with `strict`, refused). The reference bin counts as an
    estimated zero.
    """
    available = set(fit.bins) | {fit.ref_bin}
    pre, post = window_sides(w)
    missing = sorted(b for b in pre + post if b not in available)
    if missing:
        if strict:
            raise SummaryError(f"{fit.group} {window_label(w)}: bins {missing} missing from the fit")
        logger.warning("%s %s: bins %s missing from the fit; averaging the rest", fit.group, window_label(w), missing)
    pre = [b for b in pre if b in available]
    post = [b for b in post if b in available]
    if not pre or not post:
        side = "pre" if not pre else "post"
        raise SummaryError(f"{fit.group} {window_label(w)}: no {side}-period bins in the window")
    weights = {b: -1.0 / len(pre) for b in pre}
    weights.update({b: 1.0 / len(post) for b in post})
    return dict(sorted(weights.items())), missing


def _estimate_and_variance(fit: EventStudyFit, weights: dict[int, float]) -> tuple[float, Optional[float]]:
    c = np.array([weights.get(b, 0.0) for b in fit.bins])
    estimate = float(c @ np.asarray(fit.beta, dtype=float))
    V = fit.vcov_array()
    if V is None:
        return estimate, None
    return estimate, float(c @ V @ c)


def _summary(group, w, estimate, variance, dof, weights, missing, scheme) -> DiDSummary:
    se = None if variance is None else float(np.sqrt(max(variance, 0.0)))
    t = p = None
    degenerate = False
    if se is not None and dof is not None and dof >= 1:
        test = t_pvalue(estimate, se, dof)
        t, p, degenerate = test.t, test.p, test.degenerate
    return DiDSummary(
        group=group,
        window=window_label(w),
        estimate=estimate,
        se=se,
        t=t,
        p=p,
        stars=stars(p, scheme),
        dof=dof,
        degenerate=degenerate,
        contrast=weights,
        missing_bins=missing,
    )


def did_window(
    fit: EventStudyFit, w: Optional[int], strict: bool = False, scheme: StarScheme = DEFAULT_STARS
) -> DiDSummary:
    """Mean post-bin coefficient minus mean pre-bin coefficient within the window."""
    weights, missing = contrast_vector(fit, w, strict)
    estimate, variance = _estimate_and_variance(fit, weights)
    return _summary(fit.group, w, estimate, variance, fit.dof_inference, weights, missing, scheme)


def did_treated_minus_control(
    fit_t: EventStudyFit,
    fit_c: EventStudyFit,
    w: Optional[int],
    dof_rule: DofRule = "treated",
    strict: bool = False,
    scheme: StarScheme = DEFAULT_STARS,
) -> DiDSummary:
    """
    Treated DiD minus control DiD. The two fits come from disjoint samples,
    so their variances add.
    """
    w_t, missing_t = contrast_vector(fit_t, w, strict)
    w_c, missing_c = contrast_vector(fit_c, w, strict)
    if set(w_t) != set(w_c):
        if strict:
            raise SummaryError(f"{window_label(w)}: treated and control fits average different bins")
        logger.warning(
            "%s: treated averages bins %s, control averages %s", window_label(w), sorted(w_t), sorted(w_c)
        )
    est_t, var_t = _estimate_and_variance(fit_t, w_t)
    est_c, var_c = _estimate_and_variance(fit_c, w_c)
    variance = None if var_t is None or var_c is None else var_t + var_c
    dof = fit_t.dof_inference if dof_rule == "treated" else min(fit_t.dof_inference, fit_c.dof_inference)
    group = f"{fit_t.group}-{fit_c.group}"
    missing = sorted(set(missing_t) | set(missing_c))
    return _summary(group, w, est_t - est_c, variance, dof, w_t, missing, scheme)


def did_all(
    fit_t: EventStudyFit,
    fit_c: Optional[EventStudyFit],
    windows: Sequence[Optional[int]],
    dof_rule: DofRule = "treated",
    strict: bool = False,
) -> list[DiDSummary]:
    """Treated, control and treated-minus-control summaries for every window."""
    out: list[DiDSummary] = []
    for w in windows:
        out.append(did_window(fit_t, w, strict))
        if fit_c is not None:
            out.append(did_window(fit_c, w, strict))
            out.append(did_treated_minus_control(fit_t, fit_c, w, dof_rule, strict))
    return out


# --- Plot data ---

def export_plot_data(fit: EventStudyFit, level: float = 0.90) -> PlotSeries:
    """Per-bin estimate with a two-sided t confidence interval; the reference bin is an exact zero."""
    V = fit.vcov_array()
    if V is None:
        raise SummaryError(f"{fit.group}: fit has no covariance matrix")
    if fit.dof_inference < 1:
        raise SummaryError(f"{fit.group}: no degrees of freedom for inference")
    q = t_quantile(1.0 - (1.0 - level) / 2.0, fit.dof_inference)
    points = [PlotPoint(bin=fit.ref_bin, estimate=0.0, lower=0.0, upper=0.0)]
    for i, b in enumerate(fit.bins):
        est = float(fit.beta[i])
        half = q * float(np.sqrt(max(V[i, i], 0.0)))
        points.append(PlotPoint(bin=b, estimate=est, lower=est - half, upper=est + half))
    points.sort(key=lambda pt: pt.bin)
    return PlotSeries(group=fit.group, level=level, points=points)


def plot_columns(level: float) -> list[str]:
    pct = f"{level * 100:g}"
    return ["bin", "group", "estimate", f"lo{pct}", f"hi{pct}"]


def write_plot_csv(path: str | Path, series: Iterable[PlotSeries], level: Optional[float] = None) -> None:
    """Long-format series file; `level` names the interval columns when there are no series."""
    series = list(series)
    levels = {s.level for s in series}
    if len(levels) > 1 or (level is not None and levels - {level}):
        raise SummaryError(f"series mix confidence levels {sorted(levels | ({level} if level else set()))}")
    level = levels.pop() if levels else (level or 0.90)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(plot_columns(level))
        for s in series:
            for pt in s.points:
                writer.writerow([pt.bin, s.group, repr(pt.estimate), repr(pt.lower), repr(pt.upper)])
