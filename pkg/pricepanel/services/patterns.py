"""
SUP keyword patterns with ILIKE semantics.

`%` matches any sequence, `_` any single character, `\\` escapes the next
character. Matching covers the whole name and ignores case (Unicode simple
case folding, as done by `re.IGNORECASE`).
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional

from ..errors import PatternError
from ..schemas import SupPattern, SupPatternSet

logger = logging.getLogger(__name__)

STRICT_CONTROL_PATTERN = "%graphics card%"


@lru_cache(maxsize=4096)
def compile_ilike(pattern: str) -> re.Pattern[str]:
    parts: list[str] = []
    chars = iter(pattern)
    for ch in chars:
        if ch == "\\":
            nxt = next(chars, None)
            if nxt is None:
                raise PatternError(f"unterminated escape in pattern {pattern!r}")
            parts.append(re.escape(nxt))
        elif ch == "%":
            parts.append(".*")
        elif ch == "_":
            parts.append(".")
        else:
            parts.append(re.escape(ch))
    return re.compile("".join(parts), re.IGNORECASE | re.DOTALL)


def ilike(name: str, pattern: str) -> bool:
    return compile_ilike(pattern).fullmatch(name) is not None


@dataclass(frozen=True)
class CompiledPatternSet:
    version: str
    entries: tuple[tuple[str, str, re.Pattern[str]], ...]

    @classmethod
    def from_set(cls, pattern_set: SupPatternSet) -> "CompiledPatternSet":
        return cls(
            version=pattern_set.version,
            entries=tuple((p.category, p.pattern, compile_ilike(p.pattern)) for p in pattern_set.patterns),
        )

    @property
    def categories(self) -> list[str]:
        seen: dict[str, None] = {}
        for category, _, _ in self.entries:
            seen.setdefault(category)
        return list(seen)


def classify_sup(name: str, patterns: SupPatternSet | CompiledPatternSet) -> tuple[bool, Optional[str]]:
    """Return (is_sup, category of the first matching pattern)."""
    if isinstance(patterns, SupPatternSet):
        patterns = CompiledPatternSet.from_set(patterns)
    for category, _, regex in patterns.entries:
        if regex.fullmatch(name) is not None:
            return True, category
    return False, None


def parse_patterns(lines: Iterable[str]) -> SupPatternSet:
    """
    Parse the pattern file format.

    One `category<TAB>pattern` per line; `#` starts a comment line and
    `# version: X` sets the version. Every pattern is compiled here so a
    malformed set fails at load time.
    """
    version = "1"
    patterns: list[SupPattern] = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            continue
        if line.lstrip().startswith("#"):
            body = line.lstrip()[1:].strip()
            if body.lower().startswith("version:"):
                version = body.split(":", 1)[1].strip()
            continue
        if "\t" not in line:
            raise PatternError(f"line {lineno}: expected 'category<TAB>pattern'")
        category, pattern = (part.strip() for part in line.split("\t", 1))
        if not category or not pattern:
            raise PatternError(f"line {lineno}: empty category or pattern")
        try:
            compile_ilike(pattern)
        except PatternError as exc:
            raise PatternError(f"line {lineno}: {exc}") from exc
        patterns.append(SupPattern(category=category, pattern=pattern))
    return SupPatternSet(version=version, patterns=patterns)


def load_patterns(path: str | Path | None = None) -> SupPatternSet:
    """Load a pattern file; without a path, the packaged default set."""
    if path is None:
        text = resources.files("pricepanel").joinpath("data/sup_patterns.tsv").read_text(encoding="utf-8")
        source = "packaged default"
    else:
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError("patterns file not found")
        text = path.read_text(encoding="utf-8")
        source = str(path)
    pattern_set = parse_patterns(text.splitlines())
    logger.info("Loaded %d SUP patterns (version %s) from %s", len(pattern_set.patterns), pattern_set.version, source)
    return pattern_set
