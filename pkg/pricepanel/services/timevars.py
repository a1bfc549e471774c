"""
Calendar helpers: Unix time to month/ISO week, month arithmetic, event bins.

All conversions are in UTC.
"""
from __future__ import annotations

from datetime import date, datetime
from typing import NamedTuple

from dateutil import tz
from dateutil.relativedelta import relativedelta

BIN_WIDTH = 3
WINDOW_LO = -24
WINDOW_HI = 36
# 2020-01-01 00:00:00 UTC
COHORT_TS = 1_577_836_800


class YearMonth(NamedTuple):
    year: int
    month: int

    @classmethod
    def parse(cls, text: str) -> "YearMonth":
        """Parse `YYYY-MM`."""
        try:
            year_s, month_s = text.strip().split("-")
            ym = cls(int(year_s), int(month_s))
        except ValueError as exc:
            raise ValueError(f"invalid month {text!r}, expected YYYY-MM") from exc
        if not 1 <= ym.month <= 12:
            raise ValueError(f"invalid month {text!r}, expected YYYY-MM")
        return ym

    @classmethod
    def from_key(cls, key: int) -> "YearMonth":
        return cls(key // 12, key % 12 + 1)

    @property
    def key(self) -> int:
        """Months since year 0; consecutive months have consecutive keys."""
        return self.year * 12 + self.month - 1

    def shift(self, months: int) -> "YearMonth":
        d = date(self.year, self.month, 1) + relativedelta(months=months)
        return YearMonth(d.year, d.month)

    def first_second(self) -> int:
        """Unix timestamp of the first second of the month."""
        return int(datetime(self.year, self.month, 1, tzinfo=tz.UTC).timestamp())

    def __str__(self) -> str:
        return f"{self.year:04d}-{self.month:02d}"


BASE_MONTH = YearMonth(2022, 2)


def unix_to_month(ts: int) -> YearMonth:
    if ts < 0:
        raise ValueError(f"negative timestamp {ts}")
    dt = datetime.fromtimestamp(ts, tz=tz.UTC)
    return YearMonth(dt.year, dt.month)


def unix_to_week(ts: int) -> str:
    """ISO-8601 week id, e.g. `2020-W01`. Carried as metadata only."""
    if ts < 0:
        raise ValueError(f"negative timestamp {ts}")
    iso = datetime.fromtimestamp(ts, tz=tz.UTC).isocalendar()
    return f"{iso[0]:04d}-W{iso[1]:02d}"


def months_between(x: YearMonth, y: YearMonth) -> int:
    return 12 * (x.year - y.year) + (x.month - y.month)


def assign_bin(e: int, lo: int = WINDOW_LO, hi: int = WINDOW_HI) -> int:
    """3-month event bin, floor toward minus infinity (e = -1 -> -3)."""
    if not lo <= e <= hi:
        raise ValueError(f"event month {e} outside window [{lo}, {hi}]")
    return BIN_WIDTH * (e // BIN_WIDTH)


def window_bins(lo: int = WINDOW_LO, hi: int = WINDOW_HI) -> list[int]:
    """Every bin the window [lo, hi] can produce, ascending."""
    return list(range(assign_bin(lo, lo, hi), assign_bin(hi, lo, hi) + 1, BIN_WIDTH))


def parse_window(text: str) -> tuple[int, int]:
    """Parse `-24:36` into (lo, hi)."""
    try:
        lo_s, hi_s = text.split(":")
        lo, hi = int(lo_s), int(hi_s)
    except ValueError as exc:
        raise ValueError(f"invalid window {text!r}, expected LO:HI") from exc
    if lo > hi:
        raise ValueError(f"invalid window {text!r}: lower edge above upper edge")
    return lo, hi
