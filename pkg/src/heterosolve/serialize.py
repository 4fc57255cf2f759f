"""Text formatting shared by CSV/JSON emitters.

Floats are rendered at 17 significant digits, which round-trips float64
bit-exactly.  None becomes "n/a" in CSV and null in JSON; infinities use
an "inf" string marker in both (JSON has no literal for them).
"""

from __future__ import annotations

import json
import math


def fmt_float(x: float) -> str:
    return format(float(x), ".17g")


def csv_cell(value) -> str:
    if value is None:
        return "n/a"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int,)):
        return str(value)
    v = float(value)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return fmt_float(v)


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(csv_cell(v) for v in row) + "\n")


def json_ready(value):
    """Recursively replace non-JSON floats with string markers."""
    if isinstance(value, dict):
        return {k: json_ready(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_ready(v) for v in value]
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        if math.isnan(value):
            return None
    return value


def dump_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(json_ready(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def dumps_json(obj) -> str:
    return json.dumps(json_ready(obj), indent=2, sort_keys=True)
