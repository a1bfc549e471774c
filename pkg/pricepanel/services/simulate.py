"""
Synthetic raw relations with a known pass-through effect.

SUP products carry names from the packaged keyword classes so the classifier recovers the
designed labels; their prices rise by (1 + effect/100) from the first
post-policy bin on. Everything is drawn from one seeded numpy generator, so
a seed fixes every output byte.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import partial
from decimal import ROUND_HALF_EVEN, Decimal
from pathlib import Path
from typing import Optional

import numpy as np

from ..deps import process_map
from ..schemas import ClickRecord, OfferRecord, ProductRecord, RetailerRecord, SimConfig
from .estimator import RegressionSample, fit_event_study
from .ingest import write_table
from .patterns import load_patterns
from .pipeline import build_panel
from .tdist import t_quantile
from .timevars import BASE_MONTH, BIN_WIDTH, COHORT_TS, YearMonth, months_between

logger = logging.getLogger(__name__)

CENT = Decimal("0.01")
DIME = Decimal("0.10")
DAY = 86_400

# One stem per SUP keyword class; each contains a keyword of the packaged set.
SUP_NAMES = [
    ("Balloons", "Helium-Luftballon Set"),
    ("Beverage cups", "To-Go Becher 300ml"),
    ("Food containers", "Takeaway Box Menüschale"),
    ("Films & wraps", "Plastikfolie Rolle 30m"),
    ("Plastic carrier bags", "Plastiktüte 100er Pack"),
    ("Wet wipes", "Feuchttuch Spenderbox"),
]
CONTROL_NAMES = [
    "RTX 4070 Graphics Card 12GB",
    "USB-C Ladekabel 2m",
    "Bluetooth Lautsprecher",
    "Radeon RX 7800 graphics card",
    "Edelstahl Thermoskanne",
    "Mechanische Tastatur",
]


@dataclass(frozen=True)
class SimulatedData:
    products: tuple[ProductRecord, ...]
    offers: tuple[OfferRecord, ...]
    clicks: tuple[ClickRecord, ...]
    retailers: tuple[RetailerRecord, ...]
    sup_ids: frozenset[str]


@dataclass(frozen=True)
class CoverageResult:
    replications: int
    true_effect: float
    mean_post_estimate: float
    coverage: float
    level: float


def _months(cfg: SimConfig) -> list[YearMonth]:
    start, end = YearMonth.parse(cfg.start_month), YearMonth.parse(cfg.end_month)
    return [start.shift(k) for k in range(months_between(end, start) + 1)]


def _price(base: Decimal, factor: Decimal, log_shock: float) -> Decimal:
    price = base * factor
    if log_shock != 0.0:
        price *= Decimal(repr(math.exp(log_shock)))
    return price.quantize(CENT, rounding=ROUND_HALF_EVEN)


def generate(cfg: SimConfig) -> SimulatedData:
    """Draw products, retailers, offers and clicks for every (product, retailer, month)."""
    rng = np.random.default_rng(cfg.seed)
    months = _months(cfg)
    n_sup = round(cfg.n_products * cfg.sup_share)
    effect = 1 + Decimal(repr(float(cfg.true_effect))) / 100

    products = []
    sup_ids = set()
    for k in range(cfg.n_products):
        prod_id = f"p{k:04d}"
        if k < n_sup:
            _, stem = SUP_NAMES[k % len(SUP_NAMES)]
            sup_ids.add(prod_id)
        else:
            stem = CONTROL_NAMES[(k - n_sup) % len(CONTROL_NAMES)]
        born_ts = COHORT_TS + 1 + int(rng.integers(0, 365 * DAY))
        products.append(ProductRecord(prod_id=prod_id, name=f"{stem} #{k}", born_ts=born_ts))

    retailers = []
    ret_ids = [f"r{j:03d}" for j in range(cfg.n_retailers)]
    for j, ret_id in enumerate(ret_ids):
        first_ts = int(rng.integers(COHORT_TS, COHORT_TS + 365 * DAY))
        for v in range(cfg.retailer_versions):
            name = f"Shop {j}" if v == cfg.retailer_versions - 1 else f"Shop {j} (v{v + 1})"
            retailers.append(RetailerRecord(ret_id=ret_id, ret_name=name, ts=first_ts + v * 90 * DAY))

    base = rng.integers(10, 500, size=(cfg.n_products, cfg.n_retailers))
    prod_shock = rng.normal(0.0, cfg.product_sd / 100, size=(cfg.n_products, len(months)))
    ret_shock = rng.normal(0.0, cfg.retailer_sd / 100, size=(cfg.n_retailers, len(months)))

    offers = []
    clicks = []
    for i, product in enumerate(products):
        is_sup = product.prod_id in sup_ids
        for j, ret_id in enumerate(ret_ids):
            base_price = int(base[i, j]) * DIME
            for t, month in enumerate(months):
                missing = rng.random() < cfg.missing_rate
                if missing and month != BASE_MONTH:
                    continue
                e = months_between(month, BASE_MONTH)
                factor = effect if is_sup and BIN_WIDTH * (e // BIN_WIDTH) > 0 else Decimal(1)
                start = month.first_second()
                for n in range(cfg.offers_per_cell):
                    noise = rng.normal(0.0, cfg.noise_sd / 100)
                    shock = float(prod_shock[i, t] + ret_shock[j, t] + noise)
                    offers.append(
                        OfferRecord(
                            offer_id=f"o{len(offers):08d}",
                            prod_id=product.prod_id,
                            ret_id=ret_id,
                            ts=start + int(rng.integers(0, 28 * DAY)),
                            price=_price(base_price, factor, shock),
                        )
                    )
                n_clicks = int(rng.poisson(cfg.mean_clicks))
                if n_clicks:
                    clicks.append(
                        ClickRecord(
                            prod_id=product.prod_id,
                            ret_id=ret_id,
                            ts=start + int(rng.integers(0, 28 * DAY)),
                            clicks=n_clicks,
                        )
                    )

    logger.info(
        "Simulated %d products (%d SUP), %d retailers, %d offers, %d click rows (seed %d)",
        len(products), len(sup_ids), cfg.n_retailers, len(offers), len(clicks), cfg.seed,
    )
    return SimulatedData(
        products=tuple(products),
        offers=tuple(offers),
        clicks=tuple(clicks),
        retailers=tuple(retailers),
        sup_ids=frozenset(sup_ids),
    )


def write_raw(data: SimulatedData, out_dir: str | Path) -> dict[str, Path]:
    """Write the four raw tables in the layout `ingest` reads."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {}
    for kind, rows in (
        ("products", data.products),
        ("offers", data.offers),
        ("clicks", data.clicks),
        ("retailers", data.retailers),
    ):
        paths[kind] = out_dir / f"{kind}.csv"
        write_table(paths[kind], kind, rows)
    return paths


def _one_replication(cfg: SimConfig, level: float) -> tuple[list[float], int]:
    data = generate(cfg)
    panel = build_panel(data.products, data.offers, data.clicks, data.retailers, load_patterns())
    fit = fit_event_study(RegressionSample.from_rows(panel.split.treated, group="treated"))
    q = t_quantile(1.0 - (1.0 - level) / 2.0, fit.dof_inference)
    estimates, covered = [], 0
    for b in fit.bins:
        if b <= 0:
            continue
        est, se = fit.coef(b), fit.std_error(b)
        estimates.append(est)
        covered += abs(est - cfg.true_effect) <= q * se
    return estimates, covered


def replicate(
    cfg: SimConfig, replications: int, processes: Optional[int] = None, level: float = 0.90
) -> CoverageResult:
    """
    Coverage experiment: generate, build the panel and fit the treated sample
    over consecutive seeds; report the mean post-bin estimate and the share of
    post-bin confidence intervals that contain the true effect.

    Replications run in `processes` worker processes (default `PANEL_PROCESSES`,
    else the CPU count); results do not depend on the count.
    """
    configs = [cfg.model_copy(update={"seed": cfg.seed + r}) for r in range(replications)]
    results = process_map(partial(_one_replication, level=level), configs, processes)
    estimates = [e for est, _ in results for e in est]
    covered = sum(c for _, c in results)
    result = CoverageResult(
        replications=replications,
        true_effect=cfg.true_effect,
        mean_post_estimate=float(np.mean(estimates)),
        coverage=covered / len(estimates),
        level=level,
    )
    logger.info(
        "Coverage over %d replications: mean post estimate %.3f, %.1f%% of %d CIs cover %.2f",
        replications, result.mean_post_estimate, 100 * result.coverage, len(estimates), cfg.true_effect,
    )
    return result
