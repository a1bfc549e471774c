"""
Runtime dependencies shared by the commands.

This module reads the thread and process budgets and the log level from the
environment and provides the worker pools and logging setup every stage uses.
"""
import logging
import multiprocessing
import os
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from contextlib import contextmanager
from typing import Callable, Iterable, Iterator, TypeVar

T = TypeVar("T")
R = TypeVar("R")

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def get_thread_count() -> int:
    """Worker cap from `PANEL_THREADS` (default 1). Invalid values fall back to 1."""
    raw = os.getenv("PANEL_THREADS", "1")
    try:
        value = int(raw)
    except ValueError:
        logging.getLogger(__name__).warning("Ignoring invalid PANEL_THREADS=%r", raw)
        return 1
    return max(1, value)


@contextmanager
def worker_pool(threads: int | None = None) -> Iterator[ThreadPoolExecutor]:
    with ThreadPoolExecutor(max_workers=threads or get_thread_count()) as pool:
        yield pool


def ordered_map(fn: Callable[[T], R], items: Iterable[T], threads: int | None = None) -> list[R]:
    """Map in parallel, returning results in input order."""
    items = list(items)
    threads = threads or get_thread_count()
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with worker_pool(threads) as pool:
        return list(pool.map(fn, items))


def get_process_count() -> int:
    """Process cap from `PANEL_PROCESSES` (default: CPU count). Invalid values fall back to 1."""
    raw = os.getenv("PANEL_PROCESSES")
    if raw is None:
        return os.cpu_count() or 1
    try:
        value = int(raw)
    except ValueError:
        logging.getLogger(__name__).warning("Ignoring invalid PANEL_PROCESSES=%r", raw)
        return 1
    return max(1, value)


def process_map(fn: Callable[[T], R], items: Iterable[T], processes: int | None = None) -> list[R]:
    """
    Map over worker processes, returning results in input order. `fn` and the
    items must pickle; workers start with `spawn` so no parent state leaks in.
    """
    items = list(items)
    processes = min(processes or get_process_count(), len(items))
    if processes <= 1:
        return [fn(item) for item in items]
    chunksize = max(1, len(items) // (4 * processes))
    with ProcessPoolExecutor(max_workers=processes, mp_context=multiprocessing.get_context("spawn")) as pool:
        return list(pool.map(fn, items, chunksize=chunksize))


def configure_logging(level: str | None = None) -> None:
    logging.basicConfig(
        level=(level or os.getenv("PANEL_LOG_LEVEL", "INFO")).upper(),
        format=LOG_FORMAT,
    )
