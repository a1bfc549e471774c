"""CLI stages. Each module registers one subcommand and exposes the function `run-all` calls."""
from __future__ import annotations

import json
import logging
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator

from pydantic import BaseModel

from ..errors import PanelError, StageError
from ..schemas import EventStudyFit

logger = logging.getLogger(__name__)


@contextmanager
def stage(name: str) -> Iterator[None]:
    """Tag any failure inside the block with the stage name."""
    logger.info("Stage %s started", name)
    try:
        yield
    except StageError:
        raise
    except (PanelError, OSError, ValueError) as exc:
        raise StageError(name, str(exc)) from exc
    logger.info("Stage %s finished", name)


def load_fit(path: str | Path) -> EventStudyFit:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"fit file not found: {path}")
    return EventStudyFit.model_validate_json(path.read_text(encoding="utf-8"))


def write_json(path: str | Path, payload: BaseModel | dict | list) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(payload, BaseModel):
        text = payload.model_dump_json(indent=2)
    else:
        text = json.dumps(payload, indent=2, sort_keys=True)
    path.write_text(text + "\n", encoding="utf-8")
    return path
