"""`simulate`: write synthetic raw relations from a JSON config."""
from __future__ import annotations

import argparse
from dataclasses import asdict
from pathlib import Path
from typing import Optional

from ..schemas import SimConfig
from ..services.simulate import generate, replicate, write_raw
from . import stage, write_json

STAGE = "simulate"


def load_sim_config(path: Optional[str | Path]) -> SimConfig:
    if path is None:
        return SimConfig()
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"simulation config not found: {path}")
    return SimConfig.model_validate_json(path.read_text(encoding="utf-8"))


def run_simulate(cfg: SimConfig, out_dir: str | Path) -> dict[str, Path]:
    return write_raw(generate(cfg), out_dir)


def add_parser(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser(STAGE, help="generate synthetic raw relations")
    p.add_argument("--config", help="SimConfig JSON (default: built-in defaults)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--replications", type=int, help="run the coverage experiment instead and write coverage.json")
    p.add_argument("--processes", type=int, help="worker processes for the coverage experiment")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> None:
    with stage(STAGE):
        cfg = load_sim_config(args.config)
        if args.seed is not None:
            cfg = cfg.model_copy(update={"seed": args.seed})
        if args.replications:
            result = replicate(cfg, args.replications, args.processes)
            write_json(Path(args.out) / "coverage.json", asdict(result))
        else:
            run_simulate(cfg, args.out)
