"""Deterministic tabular output: comma-separated, '.' decimal, header row.

Floats are written with repr (shortest round-trip form), so identical
experiment results produce byte-identical files on every platform.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

__all__ = ["ResultTable"]


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass(frozen=True)
class ResultTable:
    columns: tuple[str, ...]
    rows: list[tuple]

    def __post_init__(self) -> None:
        for row in self.rows:
            if len(row) != len(self.columns):
                raise ValueError(
                    f"row width {len(row)} != column count {len(self.columns)}"
                )

    def to_csv(self, path: str | Path) -> Path:
        path = Path(path)
        lines = [",".join(self.columns)]
        lines.extend(",".join(_fmt(v) for v in row) for row in self.rows)
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    def to_json(self, path: str | Path) -> Path:
        path = Path(path)
        payload = {
            "columns": list(self.columns),
            "rows": [list(row) for row in self.rows],
        }
        path.write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        return path

    def column(self, name: str) -> list:
        idx = self.columns.index(name)
        return [row[idx] for row in self.rows]
