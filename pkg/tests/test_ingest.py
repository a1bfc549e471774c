import itertools
import json
from decimal import Decimal

import pytest

from pricepanel.errors import DuplicateKeyError, HeaderMismatchError
from pricepanel.schemas import ClickRecord, OfferRecord, ProductRecord, RetailerRecord
from pricepanel.services.ingest import check_references, load_table, load_tables, retailer_snapshot


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_load_products(tmp_path):
    path = write(tmp_path / "products.csv", "prod_id,name,born_ts\na,Luftballon,1600000000\nb,Becher,1600000001\nc,GPU,1\n")
    table = load_table(path, "products")
    assert len(table.rows) == 3
    assert table.rejects == []
    assert table.rows[0] == ProductRecord(prod_id="a", name="Luftballon", born_ts=1600000000)


def test_offer_rejects(tmp_path):
    path = write(
        tmp_path / "offers.csv",
        "offer_id,prod_id,ret_id,ts,price\n"
        "o1,a,r,1577836800,2.50\n"
        "o2,a,r,1577836800,-1.00\n"
        "o3,a,r,notanumber,1.00\n"
        "o4,a,r,1577836800\n"
        "o5,a,r,1577836800,1.0000001\n",
    )
    table = load_table(path, "offers")
    assert len(table.rows) == 1
    assert table.rows[0].ts == 1577836800
    assert table.rows[0].price == Decimal("2.50")
    reasons = {r.line: r.reason for r in table.rejects}
    assert reasons[3] == "negative price"
    assert 4 in reasons
    assert reasons[5] == "expected 5 fields, got 4"
    assert reasons[6] == "price has more than 6 decimal places"
    assert len(table.rows) + len(table.rejects) == table.n_input == 5


def test_negative_clicks_rejected(tmp_path):
    path = write(tmp_path / "clicks.csv", "prod_id,ret_id,ts,clicks\na,r,10,3\na,r,10,-2\n")
    table = load_table(path, "clicks")
    assert [r.clicks for r in table.rows] == [3]
    assert table.rejects[0].reason == "negative clicks"
    assert table.rejects[0].record == "a,r,10,-2"


def test_header_mismatch(tmp_path):
    path = write(tmp_path / "products.csv", "id,name,born_ts\na,x,1\n")
    with pytest.raises(HeaderMismatchError):
        load_table(path, "products")


def test_duplicate_prod_id_is_fatal(tmp_path):
    path = write(tmp_path / "products.csv", "prod_id,name,born_ts\na,x,1\na,y,2\n")
    with pytest.raises(DuplicateKeyError):
        load_table(path, "products")


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_table(tmp_path / "products.csv", "products")


def test_jsonl(tmp_path):
    lines = [
        json.dumps({"ret_id": "r1", "ret_name": "Alpha", "ts": 10}),
        "{not json",
        json.dumps({"ret_id": "r1", "ret_name": "Alpha"}),
        json.dumps({"ret_id": 7, "ret_name": "Seven", "ts": 3}),
    ]
    table = load_table(write(tmp_path / "retailers.jsonl", "\n".join(lines) + "\n"), "retailers")
    assert [r.ret_id for r in table.rows] == ["r1", "7"]
    assert [r.line for r in table.rejects] == [2, 3]


def test_load_is_byte_deterministic(tmp_path):
    path = write(tmp_path / "offers.csv", "offer_id,prod_id,ret_id,ts,price\no1,a,r,1,2.5\no2,b,r,2,3\n")
    assert load_table(path, "offers") == load_table(path, "offers")


def test_load_tables_independent_of_threads(tmp_path):
    paths = {
        "products": write(tmp_path / "products.csv", "prod_id,name,born_ts\na,x,1600000000\n"),
        "offers": write(tmp_path / "offers.csv", "offer_id,prod_id,ret_id,ts,price\no1,a,r,1600000000,1\n"),
        "clicks": write(tmp_path / "clicks.csv", "prod_id,ret_id,ts,clicks\na,r,1600000000,4\n"),
        "retailers": write(tmp_path / "retailers.csv", "ret_id,ret_name,ts\nr,Shop,1\n"),
    }
    assert load_tables(paths, threads=1) == load_tables(paths, threads=4)


def test_snapshot_picks_latest_row():
    rows = [
        RetailerRecord(ret_id="7", ret_name="A", ts=10),
        RetailerRecord(ret_id="7", ret_name="B", ts=20),
        RetailerRecord(ret_id="7", ret_name="C", ts=15),
    ]
    assert [(s.ret_id, s.ret_name) for s in retailer_snapshot(rows)] == [("7", "B")]


def test_snapshot_single_row_unchanged():
    row = RetailerRecord(ret_id="7", ret_name="Only", ts=3)
    assert retailer_snapshot([row]) == [row]


def test_snapshot_tie_is_order_independent():
    rows = [
        RetailerRecord(ret_id="7", ret_name="Z", ts=20),
        RetailerRecord(ret_id="7", ret_name="B", ts=20),
        RetailerRecord(ret_id="8", ret_name="Q", ts=1),
    ]
    results = {tuple((s.ret_id, s.ret_name) for s in retailer_snapshot(list(p))) for p in itertools.permutations(rows)}
    assert results == {(("7", "B"), ("8", "Q"))}


def test_snapshot_empty():
    assert retailer_snapshot([]) == []


def test_check_references():
    products = (ProductRecord(prod_id="a", name="x", born_ts=1),)
    retailers = (RetailerRecord(ret_id="r", ret_name="Shop", ts=1),)
    offers = (
        OfferRecord(offer_id="1", prod_id="a", ret_id="r", ts=1, price=Decimal("1")),
        OfferRecord(offer_id="2", prod_id="zz", ret_id="r", ts=1, price=Decimal("1")),
    )
    clicks = (ClickRecord(prod_id="a", ret_id="unknown", ts=1, clicks=1),)

    kept_o, kept_c, rejects = check_references(products, offers, clicks, retailers)
    assert len(kept_o) == 2 and len(kept_c) == 1 and rejects == []

    kept_o, kept_c, rejects = check_references(products, offers, clicks, retailers, strict=True)
    assert [o.offer_id for o in kept_o] == ["1"]
    assert kept_c == ()
    assert sorted(r.reason for r in rejects) == ["unknown prod_id", "unknown ret_id"]


def test_invalid_utf8_row_is_rejected(tmp_path):
    path = tmp_path / "products.csv"
    path.write_bytes(
        b"\xef\xbb\xbfprod_id,name,born_ts\n"
        b"a,Luftballon,1600000000\n"
        b"b,Becher \xff,1600000001\n"
    )
    table = load_table(path, "products")
    assert [r.prod_id for r in table.rows] == ["a"]
    assert len(table.rejects) == 1
    reject = table.rejects[0]
    assert (reject.line, reject.reason) == (3, "invalid UTF-8")
    assert reject.record == "b,Becher �,1600000001"
    assert table.n_input == 2


def test_invalid_utf8_jsonl_line_is_rejected(tmp_path):
    path = tmp_path / "retailers.jsonl"
    path.write_bytes(b'{"ret_id": "r\xc3", "ret_name": "A", "ts": 1}\n{"ret_id": "r2", "ret_name": "B", "ts": 2}\n')
    table = load_table(path, "retailers")
    assert [r.ret_id for r in table.rows] == ["r2"]
    assert [(r.line, r.reason) for r in table.rejects] == [(1, "invalid UTF-8")]


def test_rows_keep_their_source_lines(tmp_path):
    path = write(
        tmp_path / "offers.csv",
        "offer_id,prod_id,ret_id,ts,price\n"
        "o1,a,r,1,bad\n"
        "o2,a,r,1,1.00\n"
        '"o3\nsplit",a,r,1,1.00\n'
        "o4,zz,r,1,1.00\n",
    )
    table = load_table(path, "offers")
    assert [o.offer_id for o in table.rows] == ["o2", "o3\nsplit", "o4"]
    assert table.lines == (3, 4, 6)


def test_reference_rejects_point_at_source_lines(tmp_path):
    offers = load_table(
        write(
            tmp_path / "offers.csv",
            "offer_id,prod_id,ret_id,ts,price\n"
            "o1,a,r,1,-5\n"
            "o2,a,r,1,1.00\n"
            "o3,zz,r,1,1.00\n",
        ),
        "offers",
    )
    products = (ProductRecord(prod_id="a", name="x", born_ts=1),)
    kept, _, rejects = check_references(products, offers.rows, (), (), strict=True, lines={"offers": offers.lines})
    assert [o.offer_id for o in kept] == ["o2"]
    assert [(r.line, r.reason) for r in rejects] == [(4, "unknown prod_id")]

    _, _, positional = check_references(products, offers.rows, (), (), strict=True)
    assert positional[0].line == 2


def test_reference_lines_must_match_rows():
    offers = (OfferRecord(offer_id="1", prod_id="a", ret_id="r", ts=1, price=Decimal("1")),)
    with pytest.raises(ValueError):
        check_references((), offers, (), (), lines={"offers": (2, 3)})
