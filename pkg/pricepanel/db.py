"""
Relational store configuration and session factory.

The pipeline's joins and group-bys run against a scratch SQLAlchemy store.
`PANEL_DATABASE_URL` selects the backend; the default is an in-memory SQLite
database, which gives every step its own private schema. File-backed URLs are
accepted for inspection of intermediate tables, in which case the schema is
dropped and recreated at the start of each step.
"""
import logging
import os
from contextlib import contextmanager
from typing import Iterator

from sqlalchemy import create_engine
from sqlalchemy.engine import Engine
from sqlalchemy.orm import Session, declarative_base, sessionmaker

logger = logging.getLogger(__name__)


def _normalize_sqlite_url(url: str) -> str:
    """Map the spellings of an in-memory SQLite database onto `sqlite://`.

    Leaves every other URL untouched. The in-memory form matters because
    SQLAlchemy pools it per thread, so concurrent steps never share tables.
    """
    if not url:
        return "sqlite://"
    if url in ("sqlite:///:memory:", "sqlite+pysqlite:///:memory:"):
        return "sqlite://"
    return url


DATABASE_URL_RAW = os.getenv("PANEL_DATABASE_URL", "sqlite://")
DATABASE_URL = _normalize_sqlite_url(DATABASE_URL_RAW)

# Base class for ORM models
Base = declarative_base()


def make_engine(url: str | None = None) -> Engine:
    return create_engine(_normalize_sqlite_url(url or DATABASE_URL), echo=False)


@contextmanager
def scratch_session(url: str | None = None) -> Iterator[Session]:
    """
    Yield a session on a freshly created schema.

    Commits on success, rolls back on error, and disposes of the engine
    afterwards so in-memory databases are released.
    """
    engine = make_engine(url)
    Base.metadata.drop_all(engine)
    Base.metadata.create_all(engine)
    SessionLocal = sessionmaker(engine, expire_on_commit=False)
    try:
        with SessionLocal() as session:
            try:
                yield session
                session.commit()
            except Exception:
                session.rollback()
                raise
    finally:
        engine.dispose()
