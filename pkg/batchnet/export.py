"""CSV and JSON output with 9-significant-digit numbers."""

import csv
import json
import math
from collections.abc import Iterable, Mapping, Sequence
from pathlib import Path
from typing import IO, Any

import numpy as np

from .models import Dmc


def format_number(value: Any) -> str:
    """Floats with 9 significant digits, None as an empty cell."""
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        if math.isnan(value):
            return "nan"
        return f"{float(value):.9g}"
    return str(value)


def write_csv(
    rows: Iterable[Mapping[str, Any]],
    columns: Sequence[str],
    out: str | Path | IO[str],
) -> None:
    """Rows in the given column order, with numbers formatted for stable output."""
    if isinstance(out, (str, Path)):
        with open(out, "w", newline="") as f:
            write_csv(rows, columns, f)
        return
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_number(row[c]) for c in columns])


def write_matrix_csv(dmc: Dmc, out: str | Path | IO[str]) -> None:
    """Transition matrix in row-major lexicographic order.

    The header lists the output labels; the first column holds the input label.
    """
    columns = ["input", *dmc.output_alphabet.symbols]
    rows = (
        {"input": x, **dict(zip(dmc.output_alphabet.symbols, dmc.rows[i].tolist()))}
        for i, x in enumerate(dmc.input_alphabet.symbols)
    )
    write_csv(rows, columns, out)


def _jsonable(value: Any) -> Any:
    if isinstance(value, Mapping):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.integer, np.bool_)):
        return value.item()
    if isinstance(value, (float, np.floating)):
        value = float(value)
        # JSON has no NaN; round through the 9-digit text form.
        return None if not math.isfinite(value) else float(format_number(value))
    return value


def write_json(data: Mapping[str, Any], out: str | Path | IO[str]) -> None:
    if isinstance(out, (str, Path)):
        with open(out, "w") as f:
            write_json(data, f)
        return
    json.dump(_jsonable(data), out, indent=2, sort_keys=True)
    out.write("\n")
