"""
Run manifest: what was run, on which inputs, producing which outputs.
"""
from __future__ import annotations

import hashlib
import json
from datetime import datetime
from pathlib import Path
from typing import Iterable

from dateutil import tz
from pydantic import BaseModel

from . import __version__
from .schemas import RunManifest

CHUNK = 1 << 16


def file_digest(path: str | Path) -> str:
    """sha256 of a file's bytes."""
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(CHUNK), b""):
            h.update(block)
    return h.hexdigest()


def config_hash(config: BaseModel | dict) -> str:
    """sha256 of the canonical JSON form of a configuration."""
    payload = config.model_dump(mode="json") if isinstance(config, BaseModel) else config
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _now() -> str:
    return datetime.now(tz=tz.UTC).isoformat(timespec="seconds")


def digests(paths: Iterable[str | Path], root: str | Path | None = None) -> dict[str, str]:
    """Digest per existing file, keyed by path (relative to `root` when given), sorted."""
    out = {}
    for path in paths:
        path = Path(path)
        if not path.is_file():
            continue
        key = path.relative_to(root).as_posix() if root is not None else path.as_posix()
        out[key] = file_digest(path)
    return dict(sorted(out.items()))


def start(command: list[str], config: BaseModel | dict) -> RunManifest:
    """Open a manifest for a run that is about to start."""
    return RunManifest(command=list(command), config_hash=config_hash(config), version=__version__, started_at=_now())


def finish(
    manifest: RunManifest,
    inputs: Iterable[str | Path],
    out_dir: str | Path,
    outputs: Iterable[str | Path],
) -> RunManifest:
    """Close the manifest with input digests and output digests relative to `out_dir`."""
    return manifest.model_copy(
        update={
            "finished_at": _now(),
            "inputs": digests(inputs),
            "outputs": digests(outputs, root=out_dir),
        }
    )


def write(path: str | Path, manifest: RunManifest) -> None:
    Path(path).write_text(manifest.model_dump_json(indent=2) + "\n", encoding="utf-8")
