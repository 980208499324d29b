from __future__ import annotations

import difflib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from databricks.labs.specfix.lang.ast import Program
from databricks.labs.specfix.lang.printer import pretty_print

FIXED_SUFFIX = ".fixed.mi"
PATCH_SUFFIX = ".patch.json"


def unified_diff(before: Program, after: Program, name: str = "program.mi") -> str:
    lines = difflib.unified_diff(
        pretty_print(before).splitlines(keepends=True),
        pretty_print(after).splitlines(keepends=True),
        fromfile=f"a/{name}",
        tofile=f"b/{name}",
    )
    return "".join(lines)


@dataclass(frozen=True)
class PatchRecord:
    """What a repair changed and which evidence accepted it."""

    strategy: str
    target: str
    before: str
    after: str
    evidence: dict[str, Any] = field(default_factory=dict)

    def as_dict(self) -> dict[str, Any]:
        return {
            "strategy": self.strategy,
            "target": self.target,
            "before": self.before,
            "after": self.after,
            "evidence": self.evidence,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)


def fixed_path(source: Path) -> Path:
    """`prog.mi` becomes `prog.fixed.mi` next to it."""
    return source.with_name(source.stem + FIXED_SUFFIX)


def write_fixed(source: Path, patched: Program) -> Path:
    out = fixed_path(source)
    out.write_text(pretty_print(patched), encoding="utf8")
    return out


def write_patches(source: Path, records: list[PatchRecord]) -> Path:
    """Every record of one repair run, as a JSON list in `prog.patch.json`."""
    out = source.with_name(source.stem + PATCH_SUFFIX)
    out.write_text(json.dumps([r.as_dict() for r in records], indent=2, sort_keys=True) + "\n", encoding="utf8")
    return out
