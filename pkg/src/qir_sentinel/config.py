"""Analysis settings and the recognized gate tables."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

DEFAULT_GATES = frozenset({"x", "y", "z", "h", "s", "t", "rx", "ry", "rz"})

_GATE_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


@dataclass(frozen=True)
class GateTable:
    """Gate base names accepted in ``__body`` (single) and ``__ctl`` form."""

    single: frozenset[str] = DEFAULT_GATES
    ctl: frozenset[str] = DEFAULT_GATES

    def extended(self, single=(), ctl=()) -> "GateTable":
        return GateTable(self.single | frozenset(single), self.ctl | frozenset(ctl))


class GateTableError(ValueError):
    pass


def parse_gate_table(text: str, base: GateTable = GateTable(), origin: str = "<gates>") -> GateTable:
    """One gate per line; ``name:ctl`` also enables the controlled form.

    Blank lines and ``#`` comments are ignored.
    """
    single, ctl = set(), set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        name, _, suffix = line.partition(":")
        name = name.strip()
        if not _GATE_NAME.match(name) or suffix not in ("", "ctl"):
            raise GateTableError(f"{origin}:{lineno}: bad gate entry {raw.strip()!r}")
        single.add(name)
        if suffix == "ctl":
            ctl.add(name)
    return base.extended(single, ctl)


def load_gate_table(path: str | Path, base: GateTable = GateTable()) -> GateTable:
    p = Path(path)
    return parse_gate_table(p.read_text(encoding="utf-8"), base, origin=str(p))


@dataclass(frozen=True)
class AnalysisConfig:
    entry: Optional[str] = None
    max_inline_depth: int = 8
    max_unroll: int = 1
    max_paths: int = 4096
    format: str = "text"
    fail_fast: bool = False
    extra_gates: Optional[str] = None
    gates: GateTable = field(default=GateTable(), compare=False)

    def __post_init__(self):
        if self.max_inline_depth < 1:
            raise ValueError("max_inline_depth must be at least 1")
        if self.max_unroll < 0:
            raise ValueError("max_unroll must be non-negative")
        if self.max_paths < 1:
            raise ValueError("max_paths must be at least 1")
        if self.format not in ("text", "json"):
            raise ValueError(f"unknown format {self.format!r}")

    def with_gate_file(self) -> "AnalysisConfig":
        """Return a copy whose gate table includes ``extra_gates``."""
        if self.extra_gates is None:
            return self
        from dataclasses import replace
        return replace(self, gates=load_gate_table(self.extra_gates, self.gates))
