"""CSV/JSON report writers with a reproducibility header."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import is_dataclass, asdict
from enum import Enum

import numpy as np

from .params import ModelParams

HEADER_KEYS = ("n", "gamma", "nu", "delta", "alpha", "power", "mu", "seed")


def fmt_num(x) -> str:
    """12 significant digits for floats, plain text for everything else."""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.12g}"
    return "" if x is None else str(x)


def to_jsonable(obj):
    if is_dataclass(obj) and not isinstance(obj, type):
        obj = obj.to_dict() if hasattr(obj, "to_dict") else asdict(obj)
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def header_dict(params: ModelParams | None) -> dict:
    if params is None:
        return {}
    d = params.as_dict()
    return {k: d[k] for k in HEADER_KEYS}


def emit_report(results, fmt: str, path=None, params: ModelParams | None = None,
                columns=None) -> str:
    """Serialize ``results`` and optionally write them to ``path``.

    ``csv``: ``results`` is a list of rows (dicts or sequences); the output
    starts with ``# key=value`` lines echoing ``params``.  ``json``: any
    structure; ``params`` goes under ``"params"``.  Raises ``OSError`` when
    the path cannot be written.
    """
    if fmt == "csv":
        buf = io.StringIO()
        for k, v in header_dict(params).items():
            buf.write(f"# {k}={fmt_num(v)}\n")
        rows = list(results)
        if columns is None and rows and isinstance(rows[0], dict):
            columns = list(rows[0].keys())
        w = csv.writer(buf, lineterminator="\n")
        if columns:
            w.writerow(columns)
        for row in rows:
            vals = [row.get(c) for c in columns] if isinstance(row, dict) else list(row)
            w.writerow([fmt_num(v) for v in vals])
        text = buf.getvalue()
    elif fmt == "json":
        payload = {"params": header_dict(params), "results": to_jsonable(results)}
        text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    else:
        raise ValueError("fmt must be 'csv' or 'json'")
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text


def parse_csv_report(text: str):
    """Inverse of the CSV writer: ``(header, columns, rows)`` with numbers parsed."""
    header, body = {}, []
    for line in text.splitlines():
        if line.startswith("# ") and "=" in line:
            k, v = line[2:].split("=", 1)
            header[k] = _parse(v)
        else:
            body.append(line)
    reader = csv.reader(body)
    columns = next(reader, [])
    rows = [[_parse(v) for v in r] for r in reader]
    return header, columns, rows


def _parse(v: str):
    for cast in (int, float):
        try:
            return cast(v)
        except ValueError:
            pass
    return v
