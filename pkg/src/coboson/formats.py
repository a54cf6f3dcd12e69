"""Text formats: JSON reports, CSV tables with '#' metadata, histogram grids."""

from __future__ import annotations

import json
import math
import re
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidInput
from .scan import Grid2D


def fmt(x) -> str:
    """17 significant digits for floats, plain text for everything else."""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        # JSON has no infinities or NaN; null marks them.
        return v if math.isfinite(v) else None
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def to_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, allow_nan=False)


def meta_lines(meta: dict) -> list[str]:
    return [f"# {k}={_meta_value(v)}" for k, v in meta.items()]


def _meta_value(v) -> str:
    if isinstance(v, dict):
        return json.dumps(_jsonable(v), sort_keys=True)
    return fmt(v)


def to_csv(header: Sequence[str], rows: Iterable[Sequence], meta: dict | None = None) -> str:
    lines = meta_lines(meta) if meta else []
    lines.append(",".join(header))
    lines.extend(",".join(fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def grid_to_csv(grid: Grid2D, meta: dict | None = None) -> str:
    lines = meta_lines(meta) if meta else []
    lines.append(
        f"# x_bins={grid.x_bins}, y_bins={grid.y_bins}, "
        f"x_range=[{fmt(grid.x_range[0])},{fmt(grid.x_range[1])}], "
        f"y_range=[{fmt(grid.y_range[0])},{fmt(grid.y_range[1])}], "
        f"total={grid.total}, overflow={grid.overflow}"
    )
    lines.append(f"# x_sum={fmt(grid.x_sum)}, x_sumsq={fmt(grid.x_sumsq)}")
    lines.append("xi,yi,count")
    lines.extend(f"{xi},{yi},{c}" for xi, yi, c in grid.nonzero())
    return "\n".join(lines) + "\n"


_FIELD = re.compile(r"(\w+)=(\[[^\]]*\]|[^,\s]+)")


def grid_from_csv(text: str) -> Grid2D:
    """Inverse of :func:`grid_to_csv`."""
    fields: dict[str, str] = {}
    body = []
    for line in text.splitlines():
        if line.startswith("#"):
            if "x_bins=" in line or "x_sum=" in line:
                fields.update(_FIELD.findall(line))
        elif line.strip() and not line.startswith("xi,"):
            body.append(line)
    try:
        def rng(key):
            lo, hi = fields[key].strip("[]").split(",")
            return (float(lo), float(hi))

        grid = Grid2D(int(fields["x_bins"]), int(fields["y_bins"]), rng("x_range"), rng("y_range"))
        for line in body:
            xi, yi, c = (int(v) for v in line.split(","))
            grid.counts[xi, yi] = c
        grid.total = int(fields["total"])
        grid.overflow = int(fields["overflow"])
        grid.x_sum = float(fields.get("x_sum", "0"))
        grid.x_sumsq = float(fields.get("x_sumsq", "0"))
    except (KeyError, ValueError, IndexError) as exc:
        raise InvalidInput(f"malformed grid file: {exc}") from None
    if int(grid.counts.sum()) != grid.total:
        raise InvalidInput("grid total does not match its counts")
    return grid
