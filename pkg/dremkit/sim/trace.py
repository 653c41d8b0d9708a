"""
Time-indexed simulation records and their CSV form.
"""

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from dremkit.core import DimensionError, Matrix, Vector

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class Column:
    """A named block of ``size`` trace columns; oracle columns need the true parameters."""

    name: str
    size: int = 1
    oracle: bool = False

    def labels(self) -> list[str]:
        if self.size == 1:
            return [self.name]
        return [f"{self.name}[{i}]" for i in range(self.size)]


@dataclass
class Trace:
    """
    Rows of a scenario run with a fixed schema.

    Values are recorded per column block and flattened in schema order.
    """

    scenario: str
    schema: tuple[Column, ...]
    rows: list[Vector] = field(default_factory=list)
    events: list[str] = field(default_factory=list)
    metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        names = [c.name for c in self.schema]
        if len(set(names)) != len(names):
            raise DimensionError(f"duplicate trace columns in {names}")
        self._offsets: dict[str, tuple[int, int]] = {}
        offset = 0
        for column in self.schema:
            self._offsets[column.name] = (offset, column.size)
            offset += column.size
        self._width = offset

    @property
    def width(self) -> int:
        return self._width

    @property
    def header(self) -> list[str]:
        return [label for column in self.schema for label in column.labels()]

    @property
    def oracle_columns(self) -> list[str]:
        return [c.name for c in self.schema if c.oracle]

    def __len__(self) -> int:
        return len(self.rows)

    def record(self, **values: Union[float, Vector]) -> None:
        """
        Append one row.

        Args:
            **values: One entry per schema column, scalar or array of the column size
        """
        missing = set(self._offsets) - set(values)
        unknown = set(values) - set(self._offsets)
        if missing or unknown:
            raise DimensionError(
                f"trace row mismatch: missing {sorted(missing)}, unknown {sorted(unknown)}"
            )
        row = np.empty(self._width)
        for name, (offset, size) in self._offsets.items():
            value = np.ravel(np.asarray(values[name], dtype=float))
            if value.size != size:
                raise DimensionError(f"column {name} expects {size} values, got {value.size}")
            row[offset : offset + size] = value
        self.rows.append(row)

    def column(self, name: str) -> Matrix:
        """Values of a column block over time; 1-D for scalar columns."""
        offset, size = self._offsets[name]
        data = self.as_array()[:, offset : offset + size]
        return data[:, 0] if size == 1 else data

    def last(self, name: str) -> Union[float, Vector]:
        offset, size = self._offsets[name]
        values = self.rows[-1][offset : offset + size]
        return float(values[0]) if size == 1 else values.copy()

    def as_array(self) -> Matrix:
        if not self.rows:
            return np.empty((0, self._width))
        return np.vstack(self.rows)

    def flag(self, message: str) -> None:
        """Record a singularity or hold event."""
        self.events.append(message)


def export_csv(trace: Trace, path: Union[str, Path]) -> None:
    """
    Write a trace as comma-separated text.

    Comment lines carry the schema version, scenario and oracle-only columns; then one
    header row and one row per step, with 17 significant digits and LF line endings.

    Args:
        trace: Trace to write
        path: Destination file
    """
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as f:
        f.write(f"# dremkit-trace schema={SCHEMA_VERSION} scenario={trace.scenario}\n")
        if trace.oracle_columns:
            f.write(f"# oracle={';'.join(trace.oracle_columns)}\n")
        for key, value in trace.metadata.items():
            f.write(f"# {key}={value}\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(trace.header)
        for row in trace.rows:
            writer.writerow([format(value, ".17g") for value in row])
    logger.info(f"Wrote {len(trace)} rows to {path}")


def load_csv(path: Union[str, Path]) -> tuple[list[str], Matrix]:
    """Read a trace CSV back as (header, data)."""
    with Path(path).open(newline="", encoding="utf-8") as f:
        lines = [line for line in f if not line.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader)
    data = [[float(v) for v in row] for row in reader if row]
    return header, np.array(data, dtype=float).reshape(len(data), len(header))
