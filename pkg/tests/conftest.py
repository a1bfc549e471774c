from decimal import Decimal

import numpy as np
import pytest

from pricepanel.schemas import AnalysisRow, ClickRecord, OfferRecord, ProductRecord, RetailerRecord
from pricepanel.services.patterns import load_patterns
from pricepanel.services.timevars import YearMonth

BORN = 1_600_000_000


def ts(month: str, hours: int = 1) -> int:
    return YearMonth.parse(month).first_second() + hours * 3600


@pytest.fixture
def patterns():
    return load_patterns()


@pytest.fixture
def toy_relations():
    """
    Two cohort products (one SUP, one graphics card) at two retailers,
    December 2021 to May 2022, plus one pre-cohort product and one offer
    outside the event window.
    """
    products = (
        ProductRecord(prod_id="p1", name="Helium-Luftballon Set", born_ts=BORN),
        ProductRecord(prod_id="p2", name="RTX 4090 graphics card", born_ts=BORN),
        ProductRecord(prod_id="p3", name="Partyballon alt", born_ts=1_577_836_800),
    )
    offer_rows = [
        ("p1", "r1", "2021-12", "2.00"),
        ("p1", "r1", "2022-01", "2.00"),
        ("p1", "r1", "2022-02", "2.00"),
        ("p1", "r1", "2022-02", "3.00"),
        ("p1", "r1", "2022-03", "2.50"),
        ("p1", "r1", "2022-04", "3.00"),
        ("p1", "r1", "2022-05", "3.125"),
        ("p1", "r2", "2022-02", "4.00"),
        ("p1", "r2", "2022-05", "5.00"),
        ("p2", "r1", "2022-02", "0.00"),
        ("p2", "r1", "2022-03", "1.00"),
        ("p2", "r2", "2022-01", "10.00"),
        ("p2", "r2", "2022-03", "12.00"),
        ("p3", "r1", "2022-02", "1.00"),
        ("p1", "r1", "2025-05", "9.99"),
    ]
    offers = tuple(
        OfferRecord(offer_id=f"o{k}", prod_id=p, ret_id=r, ts=ts(m, hours=k + 1), price=Decimal(price))
        for k, (p, r, m, price) in enumerate(offer_rows)
    )
    clicks = (
        ClickRecord(prod_id="p1", ret_id="r1", ts=ts("2022-02", 2), clicks=5),
        ClickRecord(prod_id="p1", ret_id="r1", ts=ts("2022-02", 30), clicks=7),
        ClickRecord(prod_id="p2", ret_id="r2", ts=ts("2022-01"), clicks=3),
    )
    retailers = (
        RetailerRecord(ret_id="r1", ret_name="Alpha", ts=10),
        RetailerRecord(ret_id="r1", ret_name="Alpha GmbH", ts=20),
        RetailerRecord(ret_id="r2", ret_name="Beta", ts=5),
    )
    return products, offers, clicks, retailers


def random_rows(rng, n_rows, n_products, n_retailers, bins, ref_bin=0):
    """Analysis rows with random keys, bins and outcome; every product and the reference bin appear."""
    rows = []
    for k in range(n_rows):
        p = k % n_products if k < n_products else int(rng.integers(n_products))
        r = k % n_retailers if k < n_retailers else int(rng.integers(n_retailers))
        b = ref_bin if k == 0 else int(rng.choice(bins))
        rows.append(
            AnalysisRow(
                prod_id=f"p{p}",
                ret_id=f"r{r}",
                month=YearMonth(2022, 2).shift(b),
                e=b,
                b=b,
                P=float(100 + rng.normal(0, 5) + 2 * p - r + (b > 0) * 3),
                logP=None,
                clk=None,
            )
        )
    return rows


@pytest.fixture
def rng():
    return np.random.default_rng(20240229)


@pytest.fixture
def panel_factory(rng):
    def make(n_rows=60, n_products=6, n_retailers=4, bins=(-6, -3, 0, 3, 6)):
        return random_rows(rng, n_rows, n_products, n_retailers, list(bins))

    return make
