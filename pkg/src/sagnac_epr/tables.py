"""Plain CSV tables with ``# key=value,...`` annotation lines."""

from __future__ import annotations

import csv
import io
import math
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigurationError


def fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    return f"{v:.9g}"


def annotation(**items) -> str:
    return "# " + ",".join(f"{k}={fmt(v) if not isinstance(v, str) else v}"
                           for k, v in items.items()) + "\n"


def write_table(fh, columns: Sequence[str], rows: Iterable[Sequence], notes: Sequence[str] = ()) -> None:
    for n in notes:
        fh.write(n)
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([v if isinstance(v, str) else fmt(v) for v in row])


def read_table(fh, required: Sequence[str] = ()) -> tuple[dict[str, np.ndarray], dict[str, str]]:
    """Numeric columns plus the key/value pairs found on ``#`` lines."""
    notes: dict[str, str] = {}
    body = []
    for ln in fh:
        s = ln.strip()
        if not s:
            continue
        if s.startswith("#"):
            for item in s.lstrip("#").strip().split(","):
                if "=" in item:
                    k, v = item.split("=", 1)
                    notes[k.strip()] = v.strip()
        else:
            body.append(ln)
    reader = csv.DictReader(io.StringIO("".join(body)))
    missing = set(required) - set(reader.fieldnames or ())
    if missing:
        raise ConfigurationError(f"table missing columns {sorted(missing)}")
    rows = list(reader)
    try:
        cols = {c: np.array([float(r[c]) for r in rows]) for c in reader.fieldnames or ()}
    except ValueError as exc:
        raise ConfigurationError(f"non-numeric table entry: {exc}") from None
    return cols, notes


def write_report(fh, report: dict) -> None:
    for k, v in report.items():
        fh.write(f"{k}={v if isinstance(v, str) else fmt(v)}\n")


def read_report(fh) -> dict[str, str]:
    out = {}
    for ln in fh:
        s = ln.strip()
        if not s or s.startswith("#"):
            continue
        if "=" not in s:
            raise ConfigurationError(f"malformed report line {s!r}")
        k, v = s.split("=", 1)
        out[k.strip()] = v.strip()
    return out
