"""Result tables written as CSV with ``#`` metadata lines."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ..errors import ConfigError, NumericalError

_SRC = Path(__file__).resolve().parents[1]


def build_id() -> str:
    """Short content hash of the package sources (stable across runs)."""
    h = hashlib.sha256()
    for p in sorted(_SRC.rglob("*.py")):
        h.update(p.relative_to(_SRC).as_posix().encode())
        h.update(p.read_bytes())
    return h.hexdigest()[:16]


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, int):
        return str(v)
    return repr(float(v))


@dataclass
class ResultTable:
    """Column-named numeric table plus ordered metadata.

    ``inf_columns`` lists columns allowed to hold ``+inf`` (written as
    ``inf``); every other cell must be finite.
    """

    columns: list[str]
    rows: list[list[float]] = field(default_factory=list)
    metadata: dict[str, Any] = field(default_factory=dict)
    inf_columns: tuple[str, ...] = ()

    def column(self, name: str) -> list[float]:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]

    def validate(self) -> None:
        """Raise :class:`NumericalError` on a malformed or non-finite table."""
        if len(set(self.columns)) != len(self.columns):
            raise NumericalError("duplicate column names")
        unknown = set(self.inf_columns) - set(self.columns)
        if unknown:
            raise NumericalError(f"inf_columns not in table: {sorted(unknown)}")
        for k, row in enumerate(self.rows):
            if len(row) != len(self.columns):
                raise NumericalError(f"row {k} has {len(row)} cells, expected {len(self.columns)}")
            for name, v in zip(self.columns, row):
                v = float(v)
                if math.isfinite(v):
                    continue
                if v == math.inf and name in self.inf_columns:
                    continue
                raise NumericalError(f"non-finite value {v} in column {name!r}, row {k}")

    def to_csv(self) -> str:
        self.validate()
        lines = [f"# {k}: {v}" for k, v in self.metadata.items()]
        if self.inf_columns:
            lines.append(f"# inf_columns: {','.join(self.inf_columns)}")
        lines.append(",".join(self.columns))
        lines.extend(",".join(_fmt(v) for v in row) for row in self.rows)
        return "\n".join(lines) + "\n"

    def write(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_csv(), encoding="utf-8")
        return path

    @classmethod
    def from_csv(cls, text: str) -> "ResultTable":
        meta: dict[str, Any] = {}
        inf_cols: tuple[str, ...] = ()
        body = []
        for line in text.splitlines():
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition(":")
                value = value.strip()
                if key == "inf_columns":
                    inf_cols = tuple(c for c in value.split(",") if c)
                else:
                    meta[key] = value
            elif line.strip():
                body.append(line)
        if not body:
            raise ConfigError("result file has no header")
        columns = body[0].split(",")
        rows = [[float(c) for c in line.split(",")] for line in body[1:]]
        table = cls(columns=columns, rows=rows, metadata=meta, inf_columns=inf_cols)
        table.validate()
        return table

    @classmethod
    def read(cls, path: str | Path) -> "ResultTable":
        return cls.from_csv(Path(path).read_text(encoding="utf-8"))

    def config(self) -> dict[str, Any]:
        """Config echo parsed back into a mapping."""
        return json.loads(self.metadata["config"])
