"""
ORM tables of the scratch relational store.

Base relations (offers, clicks, retailers) are loaded as ingested,
with the time variables attached on insert. Derived relations (price cells,
indexed cells, monthly clicks, retailer snapshot) hold the intermediate
results the joins read from.
"""
from __future__ import annotations

from decimal import Decimal

from sqlalchemy import BigInteger, Float, Integer, String, Text
from sqlalchemy.engine import Dialect
from sqlalchemy.orm import Mapped, mapped_column
from sqlalchemy.types import TypeDecorator

from .db import Base


class DecimalText(TypeDecorator):
    """Exact decimal stored as its canonical string (SQLite has no exact NUMERIC)."""

    impl = String(64)
    cache_ok = True

    def process_bind_param(self, value: Decimal | None, dialect: Dialect) -> str | None:
        if value is None:
            return None
        return str(value)

    def process_result_value(self, value: str | None, dialect: Dialect) -> Decimal | None:
        if value is None:
            return None
        return Decimal(value)


# --- Base relations ---

class Offer(Base):
    __tablename__ = "offers"
    id: Mapped[int] = mapped_column(Integer, primary_key=True)
    offer_id: Mapped[str | None] = mapped_column(String(128), nullable=True)
    prod_id: Mapped[str] = mapped_column(String(128), index=True)
    ret_id: Mapped[str] = mapped_column(String(128), index=True)
    ts: Mapped[int] = mapped_column(BigInteger)
    # integer micro-euros, so sum() stays exact
    price_units: Mapped[int] = mapped_column(BigInteger)
    month_key: Mapped[int] = mapped_column(Integer, index=True)
    e: Mapped[int] = mapped_column(Integer)


class Click(Base):
    __tablename__ = "clicks"
    id: Mapped[int] = mapped_column(Integer, primary_key=True)
    prod_id: Mapped[str] = mapped_column(String(128), index=True)
    ret_id: Mapped[str] = mapped_column(String(128), index=True)
    ts: Mapped[int] = mapped_column(BigInteger)
    clicks: Mapped[int] = mapped_column(BigInteger)
    month_key: Mapped[int] = mapped_column(Integer, index=True)
    e: Mapped[int] = mapped_column(Integer)


class Retailer(Base):
    __tablename__ = "retailers"
    id: Mapped[int] = mapped_column(Integer, primary_key=True)
    ret_id: Mapped[str] = mapped_column(String(128), index=True)
    ret_name: Mapped[str] = mapped_column(Text)
    ts: Mapped[int] = mapped_column(BigInteger)


# --- Derived relations ---

class PriceCell(Base):
    __tablename__ = "price_cells"
    prod_id: Mapped[str] = mapped_column(String(128), primary_key=True)
    ret_id: Mapped[str] = mapped_column(String(128), primary_key=True)
    month_key: Mapped[int] = mapped_column(Integer, primary_key=True)
    e: Mapped[int] = mapped_column(Integer)
    bin: Mapped[int] = mapped_column(Integer)
    mean_price: Mapped[Decimal] = mapped_column(DecimalText)


class IndexedCell(Base):
    __tablename__ = "indexed_cells"
    prod_id: Mapped[str] = mapped_column(String(128), primary_key=True)
    ret_id: Mapped[str] = mapped_column(String(128), primary_key=True)
    month_key: Mapped[int] = mapped_column(Integer, primary_key=True)
    e: Mapped[int] = mapped_column(Integer)
    bin: Mapped[int] = mapped_column(Integer)
    mean_price: Mapped[Decimal] = mapped_column(DecimalText)
    base_price: Mapped[Decimal | None] = mapped_column(DecimalText, nullable=True)
    index_level: Mapped[Decimal | None] = mapped_column(DecimalText, nullable=True)
    log_index: Mapped[float | None] = mapped_column(Float, nullable=True)


class ClickCell(Base):
    __tablename__ = "click_cells"
    prod_id: Mapped[str] = mapped_column(String(128), primary_key=True)
    ret_id: Mapped[str] = mapped_column(String(128), primary_key=True)
    month_key: Mapped[int] = mapped_column(Integer, primary_key=True)
    clicks: Mapped[int] = mapped_column(BigInteger)


class RetailerSnapshot(Base):
    __tablename__ = "retailer_snapshot"
    ret_id: Mapped[str] = mapped_column(String(128), primary_key=True)
    ret_name: Mapped[str] = mapped_column(Text)
