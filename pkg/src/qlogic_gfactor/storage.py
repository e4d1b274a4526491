from __future__ import annotations

import csv
import json
import math
from collections.abc import Iterable, Sequence
from pathlib import Path

import numpy as np

from .errors import OutputError

Cell = float | int | str | bool | None


def format_number(value: float) -> str:
    """Shortest round-trip form; exponent notation outside [1e-3, 1e6)."""
    if not math.isfinite(value):
        return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")
    magnitude = abs(value)
    if magnitude == 0.0 or 1e-3 <= magnitude < 1e6:
        return np.format_float_positional(value, unique=True, trim="-")
    return np.format_float_scientific(value, unique=True, trim="-")


def format_cell(value: Cell) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format_number(value)
    return str(value)


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence[Cell]]) -> int:
    target = Path(path)
    count = 0
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        with open(target, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\r\n")
            writer.writerow(header)
            for row in rows:
                if len(row) != len(header):
                    raise OutputError(f"{target}: row has {len(row)} cells, expected {len(header)}")
                writer.writerow([format_cell(cell) for cell in row])
                count += 1
    except OSError as exc:
        raise OutputError(f"cannot write {target}: {exc}") from exc
    return count


def dump_json(path: str | Path, payload: object) -> None:
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        with open(target, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2)
            f.write("\n")
    except OSError as exc:
        raise OutputError(f"cannot write {target}: {exc}") from exc


def load_json(path: str | Path) -> object:
    with open(path, encoding="utf-8") as f:
        return json.load(f)
