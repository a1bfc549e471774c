from datetime import datetime, timezone

import pytest

from pricepanel.services.timevars import (
    BASE_MONTH,
    YearMonth,
    assign_bin,
    months_between,
    parse_window,
    unix_to_month,
    unix_to_week,
    window_bins,
)


@pytest.mark.parametrize(
    "ts, expected",
    [(1577836800, YearMonth(2020, 1)), (0, YearMonth(1970, 1)), (1643673600, YearMonth(2022, 2))],
)
def test_unix_to_month(ts, expected):
    assert unix_to_month(ts) == expected


def test_unix_to_month_last_second_of_month():
    assert unix_to_month(1643673599) == YearMonth(2022, 1)


def test_unix_to_week():
    assert unix_to_week(1577836800) == "2020-W01"
    assert unix_to_week(0) == "1970-W01"
    assert unix_to_week(1577836800 + 10) == unix_to_week(1577836800 + 80_000)


def test_unix_to_week_agrees_with_calendar():
    for ts in range(0, 2_000_000_000, 37_000_123):
        year, week, _ = datetime.fromtimestamp(ts, tz=timezone.utc).isocalendar()
        assert unix_to_week(ts) == f"{year:04d}-W{week:02d}"


def test_months_between():
    assert months_between(YearMonth(2022, 2), YearMonth(2022, 2)) == 0
    assert months_between(YearMonth(2022, 5), YearMonth(2022, 2)) == 3
    assert months_between(YearMonth(2020, 2), BASE_MONTH) == -24
    assert months_between(YearMonth(2025, 5), BASE_MONTH) == 39


@pytest.mark.parametrize("e, b", [(0, 0), (1, 0), (2, 0), (7, 6), (-1, -3), (-3, -3), (-24, -24), (36, 36)])
def test_assign_bin(e, b):
    assert assign_bin(e) == b


@pytest.mark.parametrize("e", [-25, 37, 39])
def test_assign_bin_rejects_out_of_window(e):
    with pytest.raises(ValueError):
        assign_bin(e)


def test_window_bins():
    bins = window_bins()
    assert bins[0] == -24 and bins[-1] == 36
    assert len(bins) == 21
    assert {assign_bin(e) for e in range(-24, 37)} == set(bins)


def test_year_month_helpers():
    ym = YearMonth.parse("2022-02")
    assert str(ym) == "2022-02"
    assert YearMonth.from_key(ym.key) == ym
    assert ym.shift(-24) == YearMonth(2020, 2)
    assert ym.shift(11) == YearMonth(2023, 1)
    assert YearMonth(2021, 12) < ym
    assert ym.first_second() == 1643673600
    with pytest.raises(ValueError):
        YearMonth.parse("2022-13")


def test_parse_window():
    assert parse_window("-24:36") == (-24, 36)
    with pytest.raises(ValueError):
        parse_window("36:-24")
